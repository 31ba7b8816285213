#pragma once

#include <vector>

#include "statetrack/fsa.hpp"
#include "statetrack/lrnn.hpp"

namespace statetrack {

// Options shared by all compilers. restrict_unit_interval = true refuses any
// construction needing a transition eigenvalue below 0 (EigenRangeError);
// strict_gh materializes zero transitions as explicit n-factor GH products
// (beta = 1 along each basis direction) instead of the Zero kind.
struct CompileOptions {
    bool restrict_unit_interval = false;
    bool strict_gh = false;
};

// Scalar parity counter: h <- a(x) h + b(x) with a(0) = 1, a(1) = -1,
// b(0) = 0, b(1) = 1, h0 = 0; the state is the running parity in {0, 1}.
LrnnModel compile_parity(const CompileOptions& options = {});

// Running sum mod m as a plane rotation by 2*pi/m realized by two reflections
// per token value; prototypes at the m rotated positions decode the residue.
LrnnModel compile_cyclic(int m, const CompileOptions& options = {});

// Word problem over permutation generators on n points: transitions permute
// the coordinates of the state (1, ..., n)^T via swap factors; the decoder
// reads the permutation back and emits its lexicographic rank.
LrnnModel compile_permutation_group(int n, const std::vector<Permutation>& generators,
                                    const CompileOptions& options = {});

// Two-layer construction for the running sum mod m in which every layer-2
// transition is a single reflection: layer 1 computes the step parity
// h_t = 1 - h_{t-1} and pairs it with the token; layer 2 applies
// H((1 - 2i) pi / m) on odd steps and H((1 + 2i) pi / m) on even steps and
// decodes against interleaved reflection/rotation prototypes.
LrnnModel compile_mod_reflections(int m, const CompileOptions& options = {});

// Executes a permutation-reset cascade as one LRNN layer per level: bijective
// letters become coordinate permutations (swap factors, B = 0), constant
// letters become A = 0 with B = one-hot of the target state; each layer's
// decoder pairs the incoming token with the decoded state index.
LrnnModel cascade_to_lrnn(const Cascade& cascade, const CompileOptions& options = {});

}  // namespace statetrack
