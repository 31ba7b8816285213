#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "statetrack/linalg.hpp"

namespace statetrack {

// Deterministic finite-state automaton. delta[state][letter] is the successor
// state; no accepting set is tracked because runs are compared trajectory-wise.
struct Fsa {
    int alphabet_size = 0;
    int num_states = 0;
    int start = 0;
    std::vector<std::vector<int>> delta;

    void validate() const;
    static Fsa from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// State trajectory including the start state: result[0] = start and result[i]
// is the state after the first i letters (length |word| + 1).
std::vector<int> fsa_run(const Fsa& fsa, const std::vector<int>& word);

struct TransitionMonoid {
    // Each element is the transformation state -> state of some input word,
    // including the empty word (identity).
    std::vector<std::vector<int>> elements;
    bool is_group = false;   // true iff every element is a bijection
    bool truncated = false;  // enumeration hit the cap before closing
};

TransitionMonoid transition_monoid(const Fsa& fsa, size_t cap = 10000);

// One-line notation: p[i] is the image of i.
using Permutation = std::vector<int>;

Permutation perm_identity(int n);
bool is_permutation(const std::vector<int>& p);
// Composition "apply q first, then p", matching matrix left-multiplication:
// perm_to_matrix(compose(p, q)) == perm_to_matrix(p) * perm_to_matrix(q).
Permutation perm_compose(const Permutation& p, const Permutation& q);
Permutation perm_invert(const Permutation& p);
// Column i carries e_{p(i)}, so M e_i = e_{p(i)}.
DenseMatrix perm_to_matrix(const Permutation& p);
// At most n - 1 transpositions whose left-to-right application order composes
// to p (cycle decomposition). The identity yields an empty list.
std::vector<std::pair<int, int>> perm_to_transpositions(const Permutation& p);
// Lexicographic rank over one-line notation; identity <-> 0.
uint64_t perm_rank(const Permutation& p);
Permutation perm_unrank(uint64_t rank, int n);
uint64_t factorial(int n);

// Running word-problem products, one output per prefix, elements applied in
// word order (element i acts after elements 1..i-1).
std::vector<int> word_problem_oracle_cyclic(int m, const std::vector<int>& word);
// Symmetric-group elements are lexicographic ranks; outputs use the same code.
std::vector<uint64_t> word_problem_oracle_symmetric(int n, const std::vector<uint64_t>& word);

// Cascade of permutation-reset layers. Layer 0 consumes the input alphabet;
// layer i consumes codes pairing layer i-1's consumed token with its
// post-transition state: code = token * num_states_{i-1} + state. Its
// alphabet size is therefore alphabet_{i-1} * num_states_{i-1}.
struct Cascade {
    std::vector<Fsa> layers;

    void validate() const;  // shape constraints only
    static Cascade from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct CascadeRun {
    // states[i][t] is layer i's state after t letters (states[i][0] = start).
    std::vector<std::vector<int>> states;
    // codes[t] is the final layer's output code for input position t (0-based).
    std::vector<int> codes;
};

CascadeRun cascade_run(const Cascade& cascade, const std::vector<int>& word);

}  // namespace statetrack
