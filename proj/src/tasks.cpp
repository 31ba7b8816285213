#include "statetrack/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <utility>

#include "json.hpp"

namespace statetrack {

namespace {

// Independent stream per sample index so generation can be sharded without
// replaying earlier samples. SplitMix64 scrambles the mixed seed thoroughly.
Rng sample_rng(uint64_t seed, int index) {
    return Rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(index + 1)));
}

int mod_nonneg(long long x, int m) {
    const long long r = x % m;
    return static_cast<int>(r < 0 ? r + m : r);
}

}  // namespace

void Sample::validate() const {
    require(!tokens.empty(), "Sample: empty token sequence");
    require(tokens.size() == labels.size() && tokens.size() == mask.size(),
            "Sample: tokens, labels and mask must have equal lengths");
    for (size_t i = 0; i < tokens.size(); ++i) {
        require(tokens[i] >= 0, "Sample: negative token id");
        require(labels[i] >= 0, "Sample: negative label");
        require(mask[i] == 0 || mask[i] == 1, "Sample: mask entries must be 0 or 1");
    }
}

std::string Sample::to_json_line() const {
    nlohmann::ordered_json j;
    j["tokens"] = tokens;
    j["labels"] = labels;
    j["mask"] = mask;
    return j.dump();
}

Sample Sample::from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("Sample: invalid JSON: ") + e.what());
    }
    Sample s;
    try {
        require(j.is_object() && j.contains("tokens") && j.contains("labels") &&
                    j.contains("mask"),
                "Sample: JSON must be an object with tokens, labels and mask");
        s.tokens = j.at("tokens").get<std::vector<int>>();
        s.labels = j.at("labels").get<std::vector<int>>();
        s.mask = j.at("mask").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("Sample: malformed fields: ") + e.what());
    }
    s.validate();
    return s;
}

void write_jsonl(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_jsonl: cannot open " + path);
    for (const Sample& s : samples) {
        out << s.to_json_line() << '\n';
    }
    require(out.good(), "write_jsonl: write failed for " + path);
}

std::vector<Sample> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "read_jsonl: cannot open " + path);
    std::vector<Sample> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        samples.push_back(Sample::from_json_line(line));
    }
    return samples;
}

std::vector<Sample> gen_parity(int len_min, int len_max, int count, uint64_t seed) {
    require(len_min >= 1 && len_min <= len_max, "gen_parity: need 1 <= len_min <= len_max");
    require(count >= 0, "gen_parity: negative count");
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = sample_rng(seed, i);
        const int len = rng.range_int(len_min, len_max);
        Sample s;
        s.tokens.reserve(len);
        s.labels.reserve(len);
        int parity = 0;
        for (int t = 0; t < len; ++t) {
            const int bit = static_cast<int>(rng.below(2));
            parity ^= bit;
            s.tokens.push_back(bit);
            s.labels.push_back(parity);
        }
        // Labels are per-position running parities, but only the final answer
        // contributes to loss/accuracy: the task is "parity of the whole
        // string", evaluated once the full input has been read.
        s.mask.assign(static_cast<size_t>(len), 0);
        s.mask.back() = 1;
        out.push_back(std::move(s));
    }
    return out;
}

int ModArithVocab::lparen() const {
    require(brackets, "ModArithVocab: parentheses absent without brackets");
    return m + 5;
}

int ModArithVocab::rparen() const {
    require(brackets, "ModArithVocab: parentheses absent without brackets");
    return m + 6;
}

namespace {

// Flat chain d0 op d1 op d2 ... evaluated with '*' before '+'/'-', both
// left-associative. Terms are flushed into the total with the sign picked up
// from the preceding additive operator.
struct ChainEval {
    int m;
    long long total = 0;
    int sign = 1;
    long long term;

    explicit ChainEval(int m_, int first_digit) : m(m_), term(first_digit) {}
    void feed(int op, int digit) {  // op: 0 '+', 1 '-', 2 '*'
        if (op == 2) {
            term = (term * digit) % m;
        } else {
            total += sign * term;
            sign = (op == 1) ? -1 : 1;
            term = digit;
        }
    }
    int value() const { return mod_nonneg(total + sign * term, m); }
};

// Emits one expression node using at most `budget` tokens (budget >= 1) and
// returns its value mod m. Internal nodes are fully parenthesized; depth is
// geometric because each node splits with fixed probability.
int gen_bracket_node(Rng& rng, const ModArithVocab& v, int budget, std::vector<int>& out) {
    constexpr double kSplitProb = 0.4;
    if (budget >= 5 && rng.uniform() < kSplitProb) {
        const int inner = budget - 3;  // parens and operator cost 3
        const int left = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(inner - 1)));
        out.push_back(v.lparen());
        const int lv = gen_bracket_node(rng, v, left, out);
        const int op = static_cast<int>(rng.below(3));
        out.push_back(v.plus() + op);
        const int rv = gen_bracket_node(rng, v, inner - left, out);
        out.push_back(v.rparen());
        if (op == 0) return mod_nonneg(static_cast<long long>(lv) + rv, v.m);
        if (op == 1) return mod_nonneg(static_cast<long long>(lv) - rv, v.m);
        return mod_nonneg(static_cast<long long>(lv) * rv, v.m);
    }
    // Leaf: a digit, occasionally with a unary minus when there is room.
    const int digit = static_cast<int>(rng.below(static_cast<uint64_t>(v.m)));
    if (budget >= 2 && rng.uniform() < 0.25) {
        out.push_back(v.minus());
        out.push_back(digit);
        return mod_nonneg(-static_cast<long long>(digit), v.m);
    }
    out.push_back(digit);
    return digit;
}

}  // namespace

std::vector<Sample> gen_mod_arith(int m, bool brackets, int len_min, int len_max, int count,
                                  uint64_t seed) {
    require(m >= 2, "gen_mod_arith: modulus must be at least 2");
    require(len_min <= len_max, "gen_mod_arith: need len_min <= len_max");
    require(len_min >= 3,
            "gen_mod_arith: sequences must fit a digit, '=' and the answer slot (length >= 3)");
    require(count >= 0, "gen_mod_arith: negative count");
    const ModArithVocab v{m, brackets};
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = sample_rng(seed, i);
        const int len = rng.range_int(len_min, len_max);
        Sample s;
        s.tokens.reserve(len);
        int value;
        if (brackets) {
            value = gen_bracket_node(rng, v, len - 2, s.tokens);
        } else {
            const int ops = (len - 3) / 2;  // d (op d)^ops '=' answer
            const int d0 = static_cast<int>(rng.below(static_cast<uint64_t>(m)));
            s.tokens.push_back(d0);
            ChainEval eval(m, d0);
            for (int j = 0; j < ops; ++j) {
                const int op = static_cast<int>(rng.below(3));
                const int d = static_cast<int>(rng.below(static_cast<uint64_t>(m)));
                s.tokens.push_back(v.plus() + op);
                s.tokens.push_back(d);
                eval.feed(op, d);
            }
            value = eval.value();
        }
        s.tokens.push_back(v.equals());
        const size_t answer_pos = s.tokens.size();
        while (s.tokens.size() < static_cast<size_t>(len)) s.tokens.push_back(v.pad());
        s.labels.assign(static_cast<size_t>(len), 0);
        s.mask.assign(static_cast<size_t>(len), 0);
        s.labels[answer_pos] = value;
        s.mask[answer_pos] = 1;
        out.push_back(std::move(s));
    }
    return out;
}

uint64_t GroupSpec::order() const {
    if (kind == Kind::Cyclic) return static_cast<uint64_t>(size);
    return factorial(size);
}

namespace {

void validate_group(const GroupSpec& group, const VariantSpec& variant) {
    if (group.kind == GroupSpec::Kind::Cyclic) {
        require(group.size >= 2, "group word: cyclic modulus must be at least 2");
        require(variant.kind == VariantSpec::Kind::Full ||
                    variant.kind == VariantSpec::Kind::KTokens,
                "group word: swaps_only/up_to_3 apply to symmetric groups only");
    } else {
        require(group.size >= 1 && group.size <= 12,
                "group word: symmetric degree must be in [1, 12]");
    }
    if (variant.kind == VariantSpec::Kind::KTokens) {
        require(variant.k >= 1, "group word: k_tokens spacing must be at least 1");
    }
}

}  // namespace

std::vector<Permutation> group_generator_set(const GroupSpec& group, const VariantSpec& variant) {
    require(group.kind == GroupSpec::Kind::Symmetric,
            "group_generator_set: defined for symmetric groups");
    validate_group(group, variant);
    const int n = group.size;
    std::vector<Permutation> gens;
    switch (variant.kind) {
        case VariantSpec::Kind::Full:
        case VariantSpec::Kind::KTokens: {
            const uint64_t total = factorial(n);
            require(total <= 1000000ULL,
                    "group_generator_set: refusing to materialize more than 10^6 elements");
            for (uint64_t r = 0; r < total; ++r) gens.push_back(perm_unrank(r, n));
            return gens;  // already in rank order
        }
        case VariantSpec::Kind::SwapsOnly: {
            gens.push_back(perm_identity(n));
            for (int a = 0; a < n; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    Permutation p = perm_identity(n);
                    std::swap(p[a], p[b]);
                    gens.push_back(std::move(p));
                }
            }
            break;
        }
        case VariantSpec::Kind::UpTo3: {
            gens.push_back(perm_identity(n));
            for (int a = 0; a < n; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    Permutation p = perm_identity(n);
                    std::swap(p[a], p[b]);
                    gens.push_back(std::move(p));
                    for (int c = b + 1; c < n; ++c) {
                        Permutation cyc = perm_identity(n);  // a -> b -> c -> a
                        cyc[a] = b;
                        cyc[b] = c;
                        cyc[c] = a;
                        gens.push_back(std::move(cyc));
                        Permutation inv = perm_identity(n);  // a -> c -> b -> a
                        inv[a] = c;
                        inv[c] = b;
                        inv[b] = a;
                        gens.push_back(std::move(inv));
                    }
                }
            }
            break;
        }
    }
    std::sort(gens.begin(), gens.end(),
              [](const Permutation& p, const Permutation& q) { return perm_rank(p) < perm_rank(q); });
    return gens;
}

int group_token_alphabet(const GroupSpec& group, const VariantSpec& variant) {
    validate_group(group, variant);
    const int special = variant.kind == VariantSpec::Kind::KTokens ? 1 : 0;
    if (group.kind == GroupSpec::Kind::Cyclic) return group.size + special;
    switch (variant.kind) {
        case VariantSpec::Kind::Full:
        case VariantSpec::Kind::KTokens: {
            const uint64_t total = factorial(group.size);
            require(total + special <= 2000000000ULL, "group_token_alphabet: alphabet too large");
            return static_cast<int>(total) + special;
        }
        case VariantSpec::Kind::SwapsOnly:
            return 1 + group.size * (group.size - 1) / 2;
        case VariantSpec::Kind::UpTo3: {
            const int n = group.size;
            return 1 + n * (n - 1) / 2 + n * (n - 1) * (n - 2) / 3;
        }
    }
    throw ContractError("group_token_alphabet: unreachable");
}

std::vector<Sample> gen_group_word(const GroupSpec& group, const VariantSpec& variant, int len,
                                   int count, uint64_t seed) {
    validate_group(group, variant);
    require(len >= 1, "gen_group_word: length must be at least 1");
    require(count >= 0, "gen_group_word: negative count");

    const bool cyclic = group.kind == GroupSpec::Kind::Cyclic;
    const bool spaced = variant.kind == VariantSpec::Kind::KTokens;
    // Subset variants sample tokens as indices into the generator list; Full
    // and KTokens sample ranks over the whole group directly.
    std::vector<Permutation> gens;
    uint64_t element_count;
    if (cyclic) {
        element_count = static_cast<uint64_t>(group.size);
    } else if (variant.kind == VariantSpec::Kind::SwapsOnly ||
               variant.kind == VariantSpec::Kind::UpTo3) {
        gens = group_generator_set(group, variant);
        element_count = gens.size();
    } else {
        element_count = factorial(group.size);
    }
    const int special_token = static_cast<int>(element_count);

    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng = sample_rng(seed, i);
        Sample s;
        s.tokens.reserve(len);
        // Word of group elements with specials mapped to the identity, fed to
        // the prefix-product oracle for labels.
        if (cyclic) {
            std::vector<int> word(static_cast<size_t>(len), 0);
            for (int t = 0; t < len; ++t) {
                const bool is_element = !spaced || (t + 1) % variant.k == 0;
                if (is_element) {
                    word[t] = static_cast<int>(rng.below(element_count));
                    s.tokens.push_back(word[t]);
                } else {
                    s.tokens.push_back(special_token);
                }
            }
            s.labels = word_problem_oracle_cyclic(group.size, word);
        } else {
            std::vector<uint64_t> word(static_cast<size_t>(len), 0);
            for (int t = 0; t < len; ++t) {
                const bool is_element = !spaced || (t + 1) % variant.k == 0;
                if (is_element) {
                    const uint64_t tok = rng.below(element_count);
                    word[t] = gens.empty() ? tok : perm_rank(gens[tok]);
                    s.tokens.push_back(static_cast<int>(tok));
                } else {
                    s.tokens.push_back(special_token);
                }
            }
            const std::vector<uint64_t> ranks = word_problem_oracle_symmetric(group.size, word);
            s.labels.reserve(len);
            for (uint64_t r : ranks) s.labels.push_back(static_cast<int>(r));
        }
        s.mask.assign(static_cast<size_t>(len), 1);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace statetrack
