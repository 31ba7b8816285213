#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "statetrack/common.hpp"
#include "statetrack/fsa.hpp"
#include "statetrack/rng.hpp"

namespace statetrack {

// One training example. All three vectors have the same length; mask[i] is 1
// where the label at position i counts toward loss and accuracy, 0 elsewhere.
// Sequence tasks label every position; expression tasks label only the slot
// after '='.
struct Sample {
    std::vector<int> tokens;
    std::vector<int> labels;
    std::vector<int> mask;

    void validate() const;
    // Compact single-line JSON {"tokens":[...],"labels":[...],"mask":[...]}.
    std::string to_json_line() const;
    static Sample from_json_line(const std::string& line);
};

void write_jsonl(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_jsonl(const std::string& path);

// Uniform random bit strings labelled with the running parity of the prefix
// ending at each position. Lengths are drawn uniformly from
// [len_min, len_max]. Every position is masked in.
std::vector<Sample> gen_parity(int len_min, int len_max, int count, uint64_t seed);

// Token ids for modular-arithmetic expressions. Digits occupy 0..m-1 and the
// symbols follow, so the vocabulary is m+5 without brackets and m+7 with.
struct ModArithVocab {
    int m = 0;
    bool brackets = false;
    int plus() const { return m; }
    int minus() const { return m + 1; }
    int times() const { return m + 2; }
    int equals() const { return m + 3; }
    int pad() const { return m + 4; }
    int lparen() const;  // brackets only
    int rparen() const;  // brackets only
    int size() const { return m + (brackets ? 7 : 5); }
};

// Random arithmetic expressions over Z_m followed by '='; the value of the
// expression (reduced to 0..m-1) is the label at the position right after
// '=', which is the only masked position. Without brackets the expression is
// a flat digit-operator chain evaluated with '*' binding before '+'/'-',
// left-associative. With brackets every operation is parenthesized, operands
// are digits with an occasional unary minus, and subtree sizes are drawn so
// that nesting depth is geometrically distributed. Trailing space is padded.
std::vector<Sample> gen_mod_arith(int m, bool brackets, int len_min, int len_max, int count,
                                  uint64_t seed);

struct GroupSpec {
    enum class Kind { Cyclic, Symmetric };
    Kind kind = Kind::Cyclic;
    int size = 2;  // modulus m, or number of moved points n

    static GroupSpec cyclic(int m) { return {Kind::Cyclic, m}; }
    static GroupSpec symmetric(int n) { return {Kind::Symmetric, n}; }
    uint64_t order() const;  // m or n!
};

// Which elements a word draws its tokens from. SwapsOnly and UpTo3 restrict
// sampling to a generator subset (but labels still range over the whole
// group); KTokens(k) emits a group element only at every k-th position and a
// dedicated special token, id |G|, everywhere else.
struct VariantSpec {
    enum class Kind { Full, SwapsOnly, UpTo3, KTokens };
    Kind kind = Kind::Full;
    int k = 0;  // KTokens spacing

    static VariantSpec full() { return {Kind::Full, 0}; }
    static VariantSpec swaps_only() { return {Kind::SwapsOnly, 0}; }
    static VariantSpec up_to_3() { return {Kind::UpTo3, 0}; }
    static VariantSpec k_tokens(int k) { return {Kind::KTokens, k}; }
};

// The elements a token can stand for, in lexicographic-rank order, so token
// id == position in this list. Symmetric groups only; Full materializes all
// n! elements and therefore requires n! <= 10^6.
std::vector<Permutation> group_generator_set(const GroupSpec& group, const VariantSpec& variant);

// Token alphabet size for the variant (|generators|, plus 1 for the KTokens
// special token). Labels always live in [0, order).
int group_token_alphabet(const GroupSpec& group, const VariantSpec& variant);

// Uniform random words labelled with the running product of all group
// elements seen so far (special tokens act as the identity). Labels are
// residues for cyclic groups and lexicographic ranks for symmetric ones;
// every position is masked in.
std::vector<Sample> gen_group_word(const GroupSpec& group, const VariantSpec& variant, int len,
                                   int count, uint64_t seed);

}  // namespace statetrack
