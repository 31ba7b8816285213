#include "statetrack/fsa.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

namespace statetrack {

void Fsa::validate() const {
    require(alphabet_size >= 1, "Fsa: alphabet_size must be positive");
    require(num_states >= 1, "Fsa: num_states must be positive");
    require(start >= 0 && start < num_states, "Fsa: start state out of range");
    require(static_cast<int>(delta.size()) == num_states, "Fsa: delta must have one row per state");
    for (const auto& row : delta) {
        require(static_cast<int>(row.size()) == alphabet_size,
                "Fsa: delta row must have one entry per letter");
        for (int s : row) require(s >= 0 && s < num_states, "Fsa: delta target out of range");
    }
}

Fsa Fsa::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("Fsa: bad JSON: ") + e.what());
    }
    Fsa f;
    try {
        f.alphabet_size = j.at("alphabet_size").get<int>();
        f.num_states = j.at("num_states").get<int>();
        f.start = j.at("start").get<int>();
        f.delta = j.at("delta").get<std::vector<std::vector<int>>>();
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("Fsa: missing or mistyped field: ") + e.what());
    }
    f.validate();
    return f;
}

std::string Fsa::to_json_text() const {
    validate();
    nlohmann::json j;
    j["alphabet_size"] = alphabet_size;
    j["num_states"] = num_states;
    j["start"] = start;
    j["delta"] = delta;
    return j.dump();
}

std::vector<int> fsa_run(const Fsa& fsa, const std::vector<int>& word) {
    fsa.validate();
    std::vector<int> traj;
    traj.reserve(word.size() + 1);
    int q = fsa.start;
    traj.push_back(q);
    for (int w : word) {
        require(w >= 0 && w < fsa.alphabet_size, "fsa_run: letter out of range");
        q = fsa.delta[q][w];
        traj.push_back(q);
    }
    return traj;
}

TransitionMonoid transition_monoid(const Fsa& fsa, size_t cap) {
    fsa.validate();
    const int n = fsa.num_states;
    std::vector<int> ident(n);
    std::iota(ident.begin(), ident.end(), 0);

    std::vector<std::vector<int>> letters(fsa.alphabet_size, std::vector<int>(n));
    for (int w = 0; w < fsa.alphabet_size; ++w)
        for (int q = 0; q < n; ++q) letters[w][q] = fsa.delta[q][w];

    TransitionMonoid out;
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> frontier;
    auto add = [&](const std::vector<int>& f) {
        if (!seen.insert(f).second) return;
        if (out.elements.size() >= cap) {
            out.truncated = true;
            return;
        }
        out.elements.push_back(f);
        frontier.push_back(f);
    };
    add(ident);
    while (!frontier.empty() && !out.truncated) {
        std::vector<int> f = std::move(frontier.back());
        frontier.pop_back();
        for (const auto& g : letters) {
            // Transformation of (word of f) ++ letter: apply f, then the letter.
            std::vector<int> h(n);
            for (int q = 0; q < n; ++q) h[q] = g[f[q]];
            add(h);
            if (out.truncated) break;
        }
    }

    out.is_group = !out.truncated;
    if (!out.truncated) {
        for (const auto& f : out.elements) {
            if (!is_permutation(f)) {
                out.is_group = false;
                break;
            }
        }
    }
    return out;
}

Permutation perm_identity(int n) {
    Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

bool is_permutation(const std::vector<int>& p) {
    const int n = static_cast<int>(p.size());
    std::vector<char> hit(n, 0);
    for (int x : p) {
        if (x < 0 || x >= n || hit[x]) return false;
        hit[x] = 1;
    }
    return true;
}

Permutation perm_compose(const Permutation& p, const Permutation& q) {
    require(p.size() == q.size(), "perm_compose: size mismatch");
    require(is_permutation(p) && is_permutation(q), "perm_compose: not a permutation");
    Permutation r(p.size());
    for (size_t i = 0; i < p.size(); ++i) r[i] = p[q[i]];
    return r;
}

Permutation perm_invert(const Permutation& p) {
    require(is_permutation(p), "perm_invert: not a permutation");
    Permutation r(p.size());
    for (size_t i = 0; i < p.size(); ++i) r[p[i]] = static_cast<int>(i);
    return r;
}

DenseMatrix perm_to_matrix(const Permutation& p) {
    require(is_permutation(p), "perm_to_matrix: not a permutation");
    const int n = static_cast<int>(p.size());
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(p[i], i) = 1.0;
    return m;
}

std::vector<std::pair<int, int>> perm_to_transpositions(const Permutation& p) {
    require(is_permutation(p), "perm_to_transpositions: not a permutation");
    const int n = static_cast<int>(p.size());
    std::vector<std::pair<int, int>> swaps;
    std::vector<char> visited(n, 0);
    for (int s = 0; s < n; ++s) {
        if (visited[s] || p[s] == s) {
            visited[s] = 1;
            continue;
        }
        // Cycle (s, p(s), p(p(s)), ...): swapping s with each successive cycle
        // member, applied in emission order, reproduces the cycle:
        // (c0 c1 ... c_{r-1}) = (c0 c_{r-1}) o ... o (c0 c1), rightmost first.
        std::vector<int> cycle;
        int x = s;
        while (!visited[x]) {
            visited[x] = 1;
            cycle.push_back(x);
            x = p[x];
        }
        for (size_t i = 1; i < cycle.size(); ++i)
            swaps.emplace_back(cycle[0], cycle[i]);
    }
    return swaps;
}

uint64_t factorial(int n) {
    require(n >= 0 && n <= 20, "factorial: supported range is 0..20");
    uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<uint64_t>(i);
    return f;
}

uint64_t perm_rank(const Permutation& p) {
    require(is_permutation(p), "perm_rank: not a permutation");
    const int n = static_cast<int>(p.size());
    require(n <= 20, "perm_rank: supported sizes are 0..20");
    uint64_t rank = 0;
    for (int i = 0; i < n; ++i) {
        int smaller = 0;
        for (int j = i + 1; j < n; ++j)
            if (p[j] < p[i]) ++smaller;
        rank += static_cast<uint64_t>(smaller) * factorial(n - 1 - i);
    }
    return rank;
}

Permutation perm_unrank(uint64_t rank, int n) {
    require(n >= 0 && n <= 20, "perm_unrank: supported sizes are 0..20");
    require(rank < factorial(n), "perm_unrank: rank out of range");
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    Permutation p(n);
    for (int i = 0; i < n; ++i) {
        const uint64_t f = factorial(n - 1 - i);
        const int idx = static_cast<int>(rank / f);
        rank %= f;
        p[i] = pool[idx];
        pool.erase(pool.begin() + idx);
    }
    return p;
}

std::vector<int> word_problem_oracle_cyclic(int m, const std::vector<int>& word) {
    require(m >= 2, "word_problem_oracle_cyclic: modulus must be at least 2");
    std::vector<int> out;
    out.reserve(word.size());
    int s = 0;
    for (int w : word) {
        require(w >= 0 && w < m, "word_problem_oracle_cyclic: element out of range");
        s = (s + w) % m;
        out.push_back(s);
    }
    return out;
}

std::vector<uint64_t> word_problem_oracle_symmetric(int n, const std::vector<uint64_t>& word) {
    require(n >= 1 && n <= 20, "word_problem_oracle_symmetric: supported sizes are 1..20");
    std::vector<uint64_t> out;
    out.reserve(word.size());
    Permutation acc = perm_identity(n);
    for (uint64_t w : word) {
        const Permutation g = perm_unrank(w, n);
        acc = perm_compose(g, acc);  // g acts after everything so far
        out.push_back(perm_rank(acc));
    }
    return out;
}

void Cascade::validate() const {
    require(!layers.empty(), "Cascade: needs at least one layer");
    for (size_t i = 0; i < layers.size(); ++i) {
        layers[i].validate();
        if (i > 0) {
            const long long expect = static_cast<long long>(layers[i - 1].alphabet_size) *
                                     layers[i - 1].num_states;
            require(static_cast<long long>(layers[i].alphabet_size) == expect,
                    "Cascade: layer alphabet must cover (token, state) codes of the layer below");
        }
    }
}

Cascade Cascade::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("Cascade: bad JSON: ") + e.what());
    }
    require(j.contains("layers") && j["layers"].is_array(), "Cascade: missing layers array");
    Cascade c;
    for (const auto& jl : j["layers"]) c.layers.push_back(Fsa::from_json_text(jl.dump()));
    c.validate();
    return c;
}

std::string Cascade::to_json_text() const {
    validate();
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) j["layers"].push_back(nlohmann::json::parse(l.to_json_text()));
    return j.dump();
}

CascadeRun cascade_run(const Cascade& cascade, const std::vector<int>& word) {
    cascade.validate();
    const size_t depth = cascade.layers.size();
    CascadeRun run;
    run.states.assign(depth, {});
    for (size_t i = 0; i < depth; ++i) {
        run.states[i].reserve(word.size() + 1);
        run.states[i].push_back(cascade.layers[i].start);
    }
    run.codes.reserve(word.size());
    for (int letter : word) {
        int token = letter;
        for (size_t i = 0; i < depth; ++i) {
            const Fsa& layer = cascade.layers[i];
            require(token >= 0 && token < layer.alphabet_size, "cascade_run: token out of range");
            const int q = layer.delta[run.states[i].back()][token];
            run.states[i].push_back(q);
            // Next layer consumes this layer's token paired with its
            // post-transition state.
            token = token * layer.num_states + q;
        }
        run.codes.push_back(token);
    }
    return run;
}

}  // namespace statetrack
