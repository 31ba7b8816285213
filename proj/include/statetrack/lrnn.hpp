#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statetrack/linalg.hpp"
#include "statetrack/precision.hpp"

namespace statetrack {

// State-transition map of one token. Scalar/Diagonal/Full entries are checked
// against the contraction bound unless allow_unbounded is set; GH products are
// contractions by construction; Zero is the all-zero map.
struct Transition {
    enum class Kind { Scalar, Diagonal, Gh, Full, Zero };

    Kind kind = Kind::Zero;
    double scalar = 0.0;
    std::vector<double> diag;
    std::optional<GhProduct> gh;
    DenseMatrix full;
    int dim = 0;
    bool allow_unbounded = false;

    static Transition make_scalar(double a, bool allow_unbounded = false);
    static Transition make_diagonal(std::vector<double> entries, bool allow_unbounded = false);
    static Transition make_gh(GhProduct product);
    static Transition make_full(DenseMatrix m, bool allow_unbounded = false);
    static Transition make_zero(int dim);

    // h <- A h, in place.
    void apply(DenseMatrix& h) const;
    DenseMatrix realize() const;  // dense form (used by scan composition)
    // Smallest transition eigenvalue that must be representable; used to gate
    // constructions restricted to nonnegative eigenvalue ranges.
    double min_real_eigenvalue_bound() const;
};

// Maps a state (and the incoming token) to an integer output.
//  - ArgmaxDot: label of the prototype with the largest dot product against
//    the state's single column; ties break toward the lowest prototype index.
//  - RoundReadout: rounds every state entry to the nearest integer (entries
//    farther than 0.25 from an integer raise DecodeError). A 1-entry state
//    emits the rounded value itself; an n-entry state must hold a permutation
//    of the reference vector (1..n) and emits the lexicographic rank of the
//    permutation it realizes.
//  - PassThrough: rounded single-entry state, no reference check.
//  - PairWithToken: emits token * num_state_values + (readout - state_offset)
//    where readout = round((1,...,n) . state column).
struct Decoder {
    enum class Kind { ArgmaxDot, RoundReadout, PassThrough, PairWithToken };

    Kind kind = Kind::PassThrough;
    std::vector<std::vector<double>> prototypes;
    std::vector<int> labels;
    std::vector<int> reference;
    int num_state_values = 0;
    int state_offset = 0;

    static Decoder argmax_dot(std::vector<std::vector<double>> prototypes, std::vector<int> labels);
    static Decoder round_readout(std::vector<int> reference);
    static Decoder pass_through();
    static Decoder pair_with_token(int num_state_values, int state_offset);

    int decode(const DenseMatrix& h, int token) const;
};

struct LrnnLayer {
    int alphabet_size = 0;
    std::vector<Transition> a_map;  // one per token
    std::vector<DenseMatrix> b_map; // one per token, state-shaped
    DenseMatrix h0;
    Decoder decoder;

    void validate() const;
    int state_rows() const { return h0.rows(); }
    int state_cols() const { return h0.cols(); }
};

// Stacked layers; layer i+1 consumes layer i's decoded outputs as its tokens.
// renormalize_every = 0 disables renormalization; N > 0 rescales each state
// column to unit norm every N steps (only meaningful for models whose states
// live on the unit sphere).
struct LrnnModel {
    std::vector<LrnnLayer> layers;
    int renormalize_every = 0;

    void validate() const;
    static LrnnModel from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// One update h <- A(token) h + B(token).
void layer_step(const LrnnLayer& layer, int token, DenseMatrix& h);

// Full run; outputs are the last layer's decoded labels, one per position.
std::vector<int> model_run(const LrnnModel& model, const std::vector<int>& word);
// Same, with every state cast to the grid after every step.
std::vector<int> model_run_cast(const LrnnModel& model, const std::vector<int>& word,
                                const CastGrid& grid);

// Final state of the last layer after the word, computed by parallel prefix
// over the associative composition (A2, B2) o (A1, B1) = (A2 A1, A2 B1 + B2)
// evaluated as a balanced tree. GH transitions are realized to dense form.
// Intermediate layers decode as usual to feed the next layer; the last layer's
// decoder is not invoked. Requires renormalize_every == 0 (renormalization
// does not compose); the empty word returns the last layer's h0.
DenseMatrix scan_eval(const LrnnModel& model, const std::vector<int>& word);
// Sequential reference for the same quantity. Honors renormalize_every.
DenseMatrix sequential_final_state(const LrnnModel& model, const std::vector<int>& word);

}  // namespace statetrack
