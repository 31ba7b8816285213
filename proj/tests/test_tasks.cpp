#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "statetrack/tasks.hpp"

using namespace statetrack;

namespace {

// Independent expression evaluator: precedence-climbing parser over the
// token encoding, structurally unlike the generator's chain/tree evaluation.
struct ExprParser {
    const std::vector<int>& toks;
    ModArithVocab v;
    size_t pos = 0;

    long long factor() {
        REQUIRE(pos < toks.size());
        const int t = toks[pos];
        if (t == v.minus()) {
            ++pos;
            return -factor();
        }
        if (v.brackets && t == v.lparen()) {
            ++pos;
            const long long e = expr();
            REQUIRE(toks[pos] == v.rparen());
            ++pos;
            return e;
        }
        REQUIRE(t >= 0);
        REQUIRE(t < v.m);
        ++pos;
        return t;
    }
    long long term() {
        long long f = factor();
        while (pos < toks.size() && toks[pos] == v.times()) {
            ++pos;
            f *= factor();
        }
        return f;
    }
    long long expr() {
        long long total = term();
        while (pos < toks.size() && (toks[pos] == v.plus() || toks[pos] == v.minus())) {
            const int op = toks[pos];
            ++pos;
            total += (op == v.plus()) ? term() : -term();
        }
        return total;
    }
};

int eval_tokens(const std::vector<int>& toks, int m, bool brackets) {
    ExprParser p{toks, ModArithVocab{m, brackets}};
    const long long val = p.expr();
    REQUIRE(p.toks[p.pos] == p.v.equals());  // parser must consume the whole expression
    return static_cast<int>(((val % m) + m) % m);
}

int count_moved(const Permutation& p) {
    int moved = 0;
    for (size_t i = 0; i < p.size(); ++i) moved += p[i] != static_cast<int>(i);
    return moved;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("parity samples carry running-parity labels") {
    auto samples = gen_parity(1, 40, 200, 81);
    REQUIRE(samples.size() == 200);
    bool saw_min = false, saw_max = false;
    for (const Sample& s : samples) {
        s.validate();
        REQUIRE(s.tokens.size() >= 1);
        REQUIRE(s.tokens.size() <= 40);
        saw_min |= s.tokens.size() == 1;
        saw_max |= s.tokens.size() == 40;
        int acc = 0;
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            CHECK((s.tokens[t] == 0 || s.tokens[t] == 1));
            acc = (acc + s.tokens[t]) % 2;
            CHECK(s.labels[t] == acc);
            // Only the final answer is scored; intermediate parities are
            // context labels.
            CHECK(s.mask[t] == (t + 1 == s.tokens.size() ? 1 : 0));
        }
    }
    CHECK(saw_min);
    CHECK(saw_max);
}

TEST_CASE("length-1 parity labels equal tokens") {
    for (const Sample& s : gen_parity(1, 1, 50, 82)) {
        REQUIRE(s.tokens.size() == 1);
        CHECK(s.labels[0] == s.tokens[0]);
    }
}

TEST_CASE("parity label balance at length 40") {
    long long ones = 0, total = 0;
    for (const Sample& s : gen_parity(40, 40, 10000, 83)) {
        for (int y : s.labels) {
            ones += y;
            ++total;
        }
    }
    const double frac = static_cast<double>(ones) / static_cast<double>(total);
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
}

TEST_CASE("parity rejects bad ranges") {
    CHECK_THROWS_AS(gen_parity(0, 4, 1, 1), ContractError);
    CHECK_THROWS_AS(gen_parity(5, 4, 1, 1), ContractError);
    CHECK_THROWS_AS(gen_parity(1, 4, -1, 1), ContractError);
}

TEST_CASE("independent evaluator reproduces the worked chain example") {
    // 2 - 3 - 3 * 2 over Z_5: precedence makes this 2 - 3 - 6 = -7 = 3.
    ModArithVocab v{5, false};
    std::vector<int> toks = {2, v.minus(), 3, v.minus(), 3, v.times(), 2, v.equals()};
    CHECK(eval_tokens(toks, 5, false) == 3);
    // Left-to-right without precedence would give ((2-3)-3)*2 = -8 = 2; make
    // sure the oracle does not do that.
    CHECK(eval_tokens(toks, 5, false) != 2);
}

TEST_CASE("chain arithmetic labels match the independent evaluator") {
    for (int m : {2, 5, 7}) {
        ModArithVocab v{m, false};
        auto samples = gen_mod_arith(m, false, 3, 41, 400, 90 + m);
        for (const Sample& s : samples) {
            s.validate();
            // Shape: digits and operators alternate, then '=', answer, pads.
            size_t eq = 0;
            while (s.tokens[eq] != v.equals()) {
                REQUIRE(eq < s.tokens.size() - 1);
                if (eq % 2 == 0) {
                    CHECK(s.tokens[eq] < m);
                } else {
                    CHECK(s.tokens[eq] >= v.plus());
                    CHECK(s.tokens[eq] <= v.times());
                }
                ++eq;
            }
            REQUIRE(eq + 1 < s.tokens.size());
            for (size_t t = eq + 1; t < s.tokens.size(); ++t) CHECK(s.tokens[t] == v.pad());
            for (size_t t = 0; t < s.tokens.size(); ++t) {
                CHECK(s.mask[t] == (t == eq + 1 ? 1 : 0));
                if (t != eq + 1) CHECK(s.labels[t] == 0);
            }
            CHECK(s.labels[eq + 1] == eval_tokens(s.tokens, m, false));
        }
    }
}

TEST_CASE("length-3 budget yields single-digit expressions") {
    ModArithVocab v{7, false};
    for (const Sample& s : gen_mod_arith(7, false, 3, 3, 60, 95)) {
        REQUIRE(s.tokens.size() == 3);
        CHECK(s.tokens[0] < 7);
        CHECK(s.tokens[1] == v.equals());
        CHECK(s.tokens[2] == v.pad());
        CHECK(s.labels[2] == s.tokens[0]);
        CHECK(s.mask[2] == 1);
    }
}

TEST_CASE("bracketed arithmetic labels match the independent evaluator") {
    ModArithVocab v{5, true};
    CHECK(v.size() == 12);
    auto samples = gen_mod_arith(5, true, 3, 60, 1000, 96);
    bool saw_paren = false, saw_unary = false;
    for (const Sample& s : samples) {
        s.validate();
        int depth = 0;
        size_t eq = s.tokens.size();
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            if (s.tokens[t] == v.lparen()) ++depth;
            if (s.tokens[t] == v.rparen()) --depth;
            REQUIRE(depth >= 0);
            if (s.tokens[t] == v.equals()) {
                eq = t;
                CHECK(depth == 0);  // parens balance before '='
                break;
            }
        }
        REQUIRE(eq + 1 < s.tokens.size());
        saw_paren |= s.tokens[0] == v.lparen();
        saw_unary |= s.tokens[0] == v.minus();
        CHECK(s.mask[eq + 1] == 1);
        CHECK(s.labels[eq + 1] == eval_tokens(s.tokens, 5, true));
    }
    CHECK(saw_paren);
    CHECK(saw_unary);
}

TEST_CASE("arithmetic generator rejects bad parameters") {
    CHECK_THROWS_AS(gen_mod_arith(1, false, 3, 10, 1, 1), ContractError);
    CHECK_THROWS_AS(gen_mod_arith(5, false, 2, 10, 1, 1), ContractError);
    CHECK_THROWS_AS(gen_mod_arith(5, false, 8, 7, 1, 1), ContractError);
    ModArithVocab no_brackets{5, false};
    CHECK_THROWS_AS(no_brackets.lparen(), ContractError);
}

TEST_CASE("cyclic group words carry prefix-sum labels") {
    auto samples = gen_group_word(GroupSpec::cyclic(60), VariantSpec::full(), 30, 100, 101);
    for (const Sample& s : samples) {
        s.validate();
        int acc = 0;
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            REQUIRE(s.tokens[t] < 60);
            acc = (acc + s.tokens[t]) % 60;
            CHECK(s.labels[t] == acc);
            CHECK(s.mask[t] == 1);
        }
    }
}

TEST_CASE("symmetric full words match an independent composition fold") {
    const int n = 5;
    auto samples = gen_group_word(GroupSpec::symmetric(n), VariantSpec::full(), 32, 100, 102);
    for (const Sample& s : samples) {
        Permutation acc = perm_identity(n);
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            REQUIRE(s.tokens[t] < 120);
            acc = perm_compose(perm_unrank(static_cast<uint64_t>(s.tokens[t]), n), acc);
            CHECK(static_cast<uint64_t>(s.labels[t]) == perm_rank(acc));
        }
    }
}

TEST_CASE("swaps_only alphabet and generator set") {
    const GroupSpec g = GroupSpec::symmetric(5);
    CHECK(group_token_alphabet(g, VariantSpec::swaps_only()) == 11);
    auto gens = group_generator_set(g, VariantSpec::swaps_only());
    REQUIRE(gens.size() == 11);
    CHECK(gens[0] == perm_identity(5));  // rank order puts the identity first
    for (const Permutation& p : gens) CHECK(count_moved(p) <= 2);
    for (size_t i = 1; i < gens.size(); ++i) {
        CHECK(perm_rank(gens[i - 1]) < perm_rank(gens[i]));
    }

    auto samples = gen_group_word(g, VariantSpec::swaps_only(), 32, 200, 103);
    std::set<int> labels_seen;
    for (const Sample& s : samples) {
        Permutation acc = perm_identity(5);
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            REQUIRE(s.tokens[t] < 11);
            acc = perm_compose(gens[s.tokens[t]], acc);
            CHECK(static_cast<uint64_t>(s.labels[t]) == perm_rank(acc));
            labels_seen.insert(s.labels[t]);
        }
    }
    // Swaps generate all of S_5, so long words reach most of the group.
    CHECK(labels_seen.size() >= 100);
}

TEST_CASE("up_to_3 generator set moves at most three points") {
    const GroupSpec g = GroupSpec::symmetric(5);
    auto gens = group_generator_set(g, VariantSpec::up_to_3());
    CHECK(static_cast<int>(gens.size()) == group_token_alphabet(g, VariantSpec::up_to_3()));
    REQUIRE(gens.size() == 31);  // 1 + C(5,2) + 2*C(5,3)
    std::set<std::vector<int>> distinct(gens.begin(), gens.end());
    CHECK(distinct.size() == gens.size());
    for (const Permutation& p : gens) CHECK(count_moved(p) <= 3);

    auto samples = gen_group_word(g, VariantSpec::up_to_3(), 16, 50, 104);
    for (const Sample& s : samples) {
        Permutation acc = perm_identity(5);
        for (size_t t = 0; t < s.tokens.size(); ++t) {
            acc = perm_compose(gens[s.tokens[t]], acc);
            CHECK(static_cast<uint64_t>(s.labels[t]) == perm_rank(acc));
        }
    }
}

TEST_CASE("k_tokens spacing inserts identity specials") {
    const int m = 7, k = 3, len = 10;
    auto samples = gen_group_word(GroupSpec::cyclic(m), VariantSpec::k_tokens(k), len, 60, 105);
    for (const Sample& s : samples) {
        int acc = 0;
        for (int t = 0; t < len; ++t) {
            if ((t + 1) % k == 0) {
                REQUIRE(s.tokens[t] < m);
                acc = (acc + s.tokens[t]) % m;
            } else {
                CHECK(s.tokens[t] == m);  // special token id |G|
            }
            CHECK(s.labels[t] == acc);
        }
        // Before the first element the product is still the identity.
        for (int t = 0; t < k - 1; ++t) CHECK(s.labels[t] == 0);
    }
    CHECK(group_token_alphabet(GroupSpec::cyclic(m), VariantSpec::k_tokens(k)) == m + 1);

    auto sym = gen_group_word(GroupSpec::symmetric(4), VariantSpec::k_tokens(4), 12, 40, 106);
    for (const Sample& s : sym) {
        Permutation acc = perm_identity(4);
        for (int t = 0; t < 12; ++t) {
            if ((t + 1) % 4 == 0) {
                acc = perm_compose(perm_unrank(static_cast<uint64_t>(s.tokens[t]), 4), acc);
            } else {
                CHECK(s.tokens[t] == 24);
            }
            CHECK(static_cast<uint64_t>(s.labels[t]) == perm_rank(acc));
        }
    }
}

TEST_CASE("group word parameter validation") {
    CHECK_THROWS_AS(gen_group_word(GroupSpec::cyclic(1), VariantSpec::full(), 4, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(gen_group_word(GroupSpec::cyclic(5), VariantSpec::swaps_only(), 4, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(gen_group_word(GroupSpec::cyclic(5), VariantSpec::up_to_3(), 4, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(gen_group_word(GroupSpec::symmetric(13), VariantSpec::full(), 4, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(gen_group_word(GroupSpec::symmetric(3), VariantSpec::k_tokens(0), 4, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(gen_group_word(GroupSpec::symmetric(3), VariantSpec::full(), 0, 1, 1),
                    ContractError);
    CHECK_THROWS_AS(group_generator_set(GroupSpec::cyclic(5), VariantSpec::full()), ContractError);
    CHECK_THROWS_AS(group_generator_set(GroupSpec::symmetric(12), VariantSpec::full()),
                    ContractError);  // 12! elements is over the materialization cap
}

TEST_CASE("jsonl round trip and formatting") {
    auto samples = gen_mod_arith(5, true, 3, 20, 25, 107);
    const std::string line = samples[0].to_json_line();
    CHECK(line.find("{\"tokens\":[") == 0);  // insertion order is preserved
    CHECK(line.find("\"labels\":[") != std::string::npos);
    CHECK(line.find("\"mask\":[") != std::string::npos);
    Sample back = Sample::from_json_line(line);
    CHECK(back.tokens == samples[0].tokens);
    CHECK(back.labels == samples[0].labels);
    CHECK(back.mask == samples[0].mask);

    const std::string path = "/tmp/statetrack_tasks_test.jsonl";
    write_jsonl(path, samples);
    auto loaded = read_jsonl(path);
    REQUIRE(loaded.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].tokens == samples[i].tokens);
        CHECK(loaded[i].labels == samples[i].labels);
        CHECK(loaded[i].mask == samples[i].mask);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(Sample::from_json_line("not json"), ContractError);
    CHECK_THROWS_AS(Sample::from_json_line("{\"tokens\":[1]}"), ContractError);
    CHECK_THROWS_AS(Sample::from_json_line("{\"tokens\":[1],\"labels\":[1,2],\"mask\":[1]}"),
                    ContractError);
    CHECK_THROWS_AS(read_jsonl("/nonexistent/nope.jsonl"), ContractError);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    auto a = gen_group_word(GroupSpec::symmetric(5), VariantSpec::swaps_only(), 16, 40, 555);
    auto b = gen_group_word(GroupSpec::symmetric(5), VariantSpec::swaps_only(), 16, 40, 555);
    auto c = gen_group_word(GroupSpec::symmetric(5), VariantSpec::swaps_only(), 16, 40, 556);
    REQUIRE(a.size() == b.size());
    bool same_as_c = a.size() == c.size();
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tokens == b[i].tokens);
        CHECK(a[i].labels == b[i].labels);
        if (same_as_c && a[i].tokens != c[i].tokens) same_as_c = false;
    }
    CHECK_FALSE(same_as_c);

    const std::string p1 = "/tmp/statetrack_det_1.jsonl";
    const std::string p2 = "/tmp/statetrack_det_2.jsonl";
    write_jsonl(p1, gen_mod_arith(5, true, 3, 30, 50, 777));
    write_jsonl(p2, gen_mod_arith(5, true, 3, 30, 50, 777));
    CHECK(slurp(p1) == slurp(p2));
    CHECK(!slurp(p1).empty());
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
