#include "statetrack/lrnn.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "statetrack/fsa.hpp"

namespace statetrack {

namespace {
constexpr double kNormSlack = 1e-12;
constexpr double kFullNormSlack = 1e-8;
constexpr double kReadoutTol = 0.25;

double round_entry(double x, const char* what) {
    const double r = std::nearbyint(x);
    if (!(std::abs(x - r) < kReadoutTol))
        throw DecodeError(std::string(what) + ": state entry drifted away from the integer grid");
    return r;
}
}  // namespace

Transition Transition::make_scalar(double a, bool allow_unbounded) {
    require(std::isfinite(a), "Transition: non-finite scalar");
    if (!allow_unbounded)
        require(std::abs(a) <= 1.0 + kNormSlack, "Transition: scalar magnitude above 1");
    Transition t;
    t.kind = Kind::Scalar;
    t.scalar = a;
    t.dim = 1;
    t.allow_unbounded = allow_unbounded;
    return t;
}

Transition Transition::make_diagonal(std::vector<double> entries, bool allow_unbounded) {
    require(!entries.empty(), "Transition: empty diagonal");
    for (double a : entries) {
        require(std::isfinite(a), "Transition: non-finite diagonal entry");
        if (!allow_unbounded)
            require(std::abs(a) <= 1.0 + kNormSlack, "Transition: diagonal entry magnitude above 1");
    }
    Transition t;
    t.kind = Kind::Diagonal;
    t.dim = static_cast<int>(entries.size());
    t.diag = std::move(entries);
    t.allow_unbounded = allow_unbounded;
    return t;
}

Transition Transition::make_gh(GhProduct product) {
    Transition t;
    t.kind = Kind::Gh;
    t.dim = product.dim;
    t.gh = std::move(product);
    return t;
}

Transition Transition::make_full(DenseMatrix m, bool allow_unbounded) {
    require(m.rows() == m.cols() && m.rows() >= 1, "Transition: full matrix must be square");
    if (!allow_unbounded)
        require(spectral_norm(m) <= 1.0 + kFullNormSlack,
                "Transition: full matrix is not a contraction");
    Transition t;
    t.kind = Kind::Full;
    t.dim = m.rows();
    t.full = std::move(m);
    t.allow_unbounded = allow_unbounded;
    return t;
}

Transition Transition::make_zero(int dim) {
    require(dim >= 1, "Transition: dimension must be positive");
    Transition t;
    t.kind = Kind::Zero;
    t.dim = dim;
    return t;
}

void Transition::apply(DenseMatrix& h) const {
    require(h.rows() == dim || (kind == Kind::Scalar && h.rows() == 1),
            "Transition: state dimension mismatch");
    switch (kind) {
        case Kind::Scalar: {
            double* p = h.data();
            const size_t count = static_cast<size_t>(h.rows()) * h.cols();
            for (size_t i = 0; i < count; ++i) p[i] *= scalar;
            break;
        }
        case Kind::Diagonal:
            for (int i = 0; i < h.rows(); ++i)
                for (int j = 0; j < h.cols(); ++j) h(i, j) *= diag[i];
            break;
        case Kind::Gh:
            gh_apply_inplace(*gh, h);
            break;
        case Kind::Full:
            h = full * h;
            break;
        case Kind::Zero: {
            double* p = h.data();
            const size_t count = static_cast<size_t>(h.rows()) * h.cols();
            std::fill(p, p + count, 0.0);
            break;
        }
    }
}

DenseMatrix Transition::realize() const {
    switch (kind) {
        case Kind::Scalar: {
            DenseMatrix m(1, 1);
            m(0, 0) = scalar;
            return m;
        }
        case Kind::Diagonal: {
            DenseMatrix m(dim, dim);
            for (int i = 0; i < dim; ++i) m(i, i) = diag[i];
            return m;
        }
        case Kind::Gh:
            return gh_product_matrix(*gh);
        case Kind::Full:
            return full;
        case Kind::Zero:
            return DenseMatrix(dim, dim);
    }
    throw ContractError("Transition: unknown kind");
}

double Transition::min_real_eigenvalue_bound() const {
    switch (kind) {
        case Kind::Scalar:
            return scalar;
        case Kind::Diagonal:
            return *std::min_element(diag.begin(), diag.end());
        case Kind::Gh: {
            double lo = 1.0;
            for (const auto& f : gh->factors) lo = std::min(lo, f.distinguished_eigenvalue());
            return lo;
        }
        case Kind::Zero:
            return 0.0;
        case Kind::Full: {
            double lo = 1.0;
            for (const auto& ev : eigenvalues_small(full)) lo = std::min(lo, ev.real());
            return lo;
        }
    }
    throw ContractError("Transition: unknown kind");
}

Decoder Decoder::argmax_dot(std::vector<std::vector<double>> prototypes, std::vector<int> labels) {
    require(!prototypes.empty(), "Decoder: argmax needs at least one prototype");
    require(prototypes.size() == labels.size(), "Decoder: one label per prototype");
    require(!prototypes[0].empty(), "Decoder: empty prototype");
    for (const auto& p : prototypes)
        require(p.size() == prototypes[0].size(), "Decoder: prototypes must share one dimension");
    Decoder d;
    d.kind = Kind::ArgmaxDot;
    d.prototypes = std::move(prototypes);
    d.labels = std::move(labels);
    return d;
}

Decoder Decoder::round_readout(std::vector<int> reference) {
    require(!reference.empty(), "Decoder: reference must be nonempty");
    Decoder d;
    d.kind = Kind::RoundReadout;
    d.reference = std::move(reference);
    return d;
}

Decoder Decoder::pass_through() {
    Decoder d;
    d.kind = Kind::PassThrough;
    return d;
}

Decoder Decoder::pair_with_token(int num_state_values, int state_offset) {
    require(num_state_values >= 1, "Decoder: num_state_values must be positive");
    Decoder d;
    d.kind = Kind::PairWithToken;
    d.num_state_values = num_state_values;
    d.state_offset = state_offset;
    return d;
}

int Decoder::decode(const DenseMatrix& h, int token) const {
    switch (kind) {
        case Kind::ArgmaxDot: {
            require(h.cols() == 1, "Decoder: argmax expects a column state");
            int best = 0;
            double best_dot = 0.0;
            for (size_t p = 0; p < prototypes.size(); ++p) {
                require(static_cast<int>(prototypes[p].size()) == h.rows(),
                        "Decoder: prototype dimension mismatch");
                double dot = 0.0;
                for (int i = 0; i < h.rows(); ++i) dot += prototypes[p][i] * h(i, 0);
                if (p == 0 || dot > best_dot) {  // ties keep the lowest index
                    best = static_cast<int>(p);
                    best_dot = dot;
                }
            }
            return labels[best];
        }
        case Kind::RoundReadout: {
            require(h.cols() == 1, "Decoder: round readout expects a column state");
            if (h.rows() == 1) {
                const int value = static_cast<int>(round_entry(h(0, 0), "RoundReadout"));
                if (std::find(reference.begin(), reference.end(), value) == reference.end())
                    throw DecodeError("RoundReadout: value outside the reference set");
                return value;
            }
            // Permutation readout: entries must be 1..n in some order; emit
            // the rank of the permutation whose matrix produced the state.
            const int n = h.rows();
            Permutation q(n);
            for (int i = 0; i < n; ++i) {
                const int u = static_cast<int>(round_entry(h(i, 0), "RoundReadout"));
                if (u < 1 || u > n) throw DecodeError("RoundReadout: entry outside 1..n");
                q[i] = u - 1;  // state entry i holds p^{-1}(i) + 1
            }
            if (!is_permutation(q)) throw DecodeError("RoundReadout: state is not a permutation");
            return static_cast<int>(perm_rank(perm_invert(q)));
        }
        case Kind::PassThrough: {
            require(h.rows() == 1 && h.cols() == 1, "Decoder: pass-through expects a 1x1 state");
            return static_cast<int>(std::nearbyint(h(0, 0)));
        }
        case Kind::PairWithToken: {
            require(h.cols() == 1, "Decoder: pair readout expects a column state");
            double dot = 0.0;
            for (int i = 0; i < h.rows(); ++i) dot += (i + 1) * h(i, 0);
            const int readout = static_cast<int>(round_entry(dot, "PairWithToken"));
            const int state0 = readout - state_offset;
            if (state0 < 0 || state0 >= num_state_values)
                throw DecodeError("PairWithToken: state index out of range");
            return token * num_state_values + state0;
        }
    }
    throw ContractError("Decoder: unknown kind");
}

void LrnnLayer::validate() const {
    require(alphabet_size >= 1, "LrnnLayer: alphabet_size must be positive");
    require(h0.rows() >= 1 && h0.cols() >= 1, "LrnnLayer: empty initial state");
    require(static_cast<int>(a_map.size()) == alphabet_size,
            "LrnnLayer: one transition per token required");
    require(static_cast<int>(b_map.size()) == alphabet_size,
            "LrnnLayer: one additive term per token required");
    for (const auto& t : a_map)
        require(t.dim == h0.rows() || (t.kind == Transition::Kind::Scalar && h0.rows() == 1),
                "LrnnLayer: transition dimension mismatch");
    for (const auto& b : b_map)
        require(b.rows() == h0.rows() && b.cols() == h0.cols(),
                "LrnnLayer: additive term shape mismatch");
    if (decoder.kind == Decoder::Kind::RoundReadout && h0.rows() > 1) {
        require(static_cast<int>(decoder.reference.size()) == h0.rows(),
                "LrnnLayer: permutation readout reference must match the state dimension");
        for (int i = 0; i < h0.rows(); ++i)
            require(decoder.reference[i] == i + 1,
                    "LrnnLayer: permutation readout reference must be 1..n");
    }
}

void LrnnModel::validate() const {
    require(!layers.empty(), "LrnnModel: needs at least one layer");
    require(renormalize_every >= 0, "LrnnModel: renormalize_every must be nonnegative");
    for (const auto& l : layers) l.validate();
}

namespace {

nlohmann::json matrix_to_json(const DenseMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

DenseMatrix matrix_from_json(const nlohmann::json& j) {
    require(j.is_array() && !j.empty(), "model JSON: matrix must be a nonempty array of rows");
    return DenseMatrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

nlohmann::json transition_to_json(const Transition& t) {
    nlohmann::json j;
    switch (t.kind) {
        case Transition::Kind::Scalar:
            j["kind"] = "scalar";
            j["value"] = t.scalar;
            break;
        case Transition::Kind::Diagonal:
            j["kind"] = "diagonal";
            j["entries"] = t.diag;
            break;
        case Transition::Kind::Gh: {
            j["kind"] = "gh";
            j["dim"] = t.gh->dim;
            nlohmann::json fs = nlohmann::json::array();
            for (const auto& f : t.gh->factors) fs.push_back({{"beta", f.beta}, {"v", f.v}});
            j["factors"] = std::move(fs);
            break;
        }
        case Transition::Kind::Full:
            j["kind"] = "full";
            j["matrix"] = matrix_to_json(t.full);
            break;
        case Transition::Kind::Zero:
            j["kind"] = "zero";
            j["dim"] = t.dim;
            break;
    }
    if (t.allow_unbounded) j["allow_unbounded"] = true;
    return j;
}

Transition transition_from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", "");
    const bool unbounded = j.value("allow_unbounded", false);
    if (kind == "scalar") return Transition::make_scalar(j.at("value").get<double>(), unbounded);
    if (kind == "diagonal")
        return Transition::make_diagonal(j.at("entries").get<std::vector<double>>(), unbounded);
    if (kind == "gh") {
        std::vector<GhFactor> fs;
        for (const auto& jf : j.at("factors"))
            fs.emplace_back(jf.at("v").get<std::vector<double>>(), jf.at("beta").get<double>());
        return Transition::make_gh(GhProduct(j.at("dim").get<int>(), std::move(fs)));
    }
    if (kind == "full") return Transition::make_full(matrix_from_json(j.at("matrix")), unbounded);
    if (kind == "zero") return Transition::make_zero(j.at("dim").get<int>());
    throw ContractError("model JSON: unknown transition kind '" + kind + "'");
}

nlohmann::json decoder_to_json(const Decoder& d) {
    nlohmann::json j;
    switch (d.kind) {
        case Decoder::Kind::ArgmaxDot:
            j["kind"] = "argmax_dot";
            j["prototypes"] = d.prototypes;
            j["labels"] = d.labels;
            break;
        case Decoder::Kind::RoundReadout:
            j["kind"] = "round_readout";
            j["reference"] = d.reference;
            break;
        case Decoder::Kind::PassThrough:
            j["kind"] = "pass_through";
            break;
        case Decoder::Kind::PairWithToken:
            j["kind"] = "pair_with_token";
            j["num_state_values"] = d.num_state_values;
            j["state_offset"] = d.state_offset;
            break;
    }
    return j;
}

Decoder decoder_from_json(const nlohmann::json& j) {
    const std::string kind = j.value("kind", "");
    if (kind == "argmax_dot")
        return Decoder::argmax_dot(j.at("prototypes").get<std::vector<std::vector<double>>>(),
                                   j.at("labels").get<std::vector<int>>());
    if (kind == "round_readout")
        return Decoder::round_readout(j.at("reference").get<std::vector<int>>());
    if (kind == "pass_through") return Decoder::pass_through();
    if (kind == "pair_with_token")
        return Decoder::pair_with_token(j.at("num_state_values").get<int>(),
                                        j.at("state_offset").get<int>());
    throw ContractError("model JSON: unknown decoder kind '" + kind + "'");
}

}  // namespace

LrnnModel LrnnModel::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("model JSON: parse failure: ") + e.what());
    }
    LrnnModel model;
    try {
        require(j.value("format", "") == "statetrack-model-v1",
                "model JSON: unknown or missing format tag");
        model.renormalize_every = j.value("renormalize_every", 0);
        for (const auto& jl : j.at("layers")) {
            LrnnLayer layer;
            layer.alphabet_size = jl.at("alphabet_size").get<int>();
            layer.h0 = matrix_from_json(jl.at("h0"));
            for (const auto& jt : jl.at("a")) layer.a_map.push_back(transition_from_json(jt));
            for (const auto& jb : jl.at("b")) layer.b_map.push_back(matrix_from_json(jb));
            layer.decoder = decoder_from_json(jl.at("decoder"));
            model.layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("model JSON: missing or mistyped field: ") + e.what());
    }
    model.validate();
    return model;
}

std::string LrnnModel::to_json_text() const {
    validate();
    nlohmann::json j;
    j["format"] = "statetrack-model-v1";
    j["renormalize_every"] = renormalize_every;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : layers) {
        nlohmann::json jl;
        jl["alphabet_size"] = layer.alphabet_size;
        jl["h0"] = matrix_to_json(layer.h0);
        nlohmann::json ja = nlohmann::json::array();
        for (const auto& t : layer.a_map) ja.push_back(transition_to_json(t));
        jl["a"] = std::move(ja);
        nlohmann::json jb = nlohmann::json::array();
        for (const auto& b : layer.b_map) jb.push_back(matrix_to_json(b));
        jl["b"] = std::move(jb);
        jl["decoder"] = decoder_to_json(layer.decoder);
        j["layers"].push_back(std::move(jl));
    }
    return j.dump();
}

void layer_step(const LrnnLayer& layer, int token, DenseMatrix& h) {
    require(token >= 0 && token < layer.alphabet_size, "layer_step: token out of range");
    layer.a_map[token].apply(h);
    const DenseMatrix& b = layer.b_map[token];
    double* hp = h.data();
    const double* bp = b.data();
    const size_t count = static_cast<size_t>(h.rows()) * h.cols();
    for (size_t i = 0; i < count; ++i) hp[i] += bp[i];
}

namespace {

void renormalize_columns(DenseMatrix& h) {
    for (int j = 0; j < h.cols(); ++j) {
        double n2 = 0.0;
        for (int i = 0; i < h.rows(); ++i) n2 += h(i, j) * h(i, j);
        const double nrm = std::sqrt(n2);
        if (nrm > 1e-30)
            for (int i = 0; i < h.rows(); ++i) h(i, j) /= nrm;
    }
}

// Scalar single-layer models power the long-horizon checks; a dedicated loop
// keeps the per-step cost at a handful of flops.
bool scalar_fast_path_applies(const LrnnModel& model) {
    if (model.layers.size() != 1 || model.renormalize_every != 0) return false;
    const LrnnLayer& l = model.layers[0];
    if (l.h0.rows() != 1 || l.h0.cols() != 1) return false;
    for (const auto& t : l.a_map)
        if (t.kind != Transition::Kind::Scalar && t.kind != Transition::Kind::Zero) return false;
    return l.decoder.kind == Decoder::Kind::RoundReadout ||
           l.decoder.kind == Decoder::Kind::PassThrough;
}

std::vector<int> run_scalar_fast(const LrnnModel& model, const std::vector<int>& word,
                                 const CastGrid* grid) {
    const LrnnLayer& l = model.layers[0];
    std::vector<double> a(l.alphabet_size), b(l.alphabet_size);
    for (int w = 0; w < l.alphabet_size; ++w) {
        a[w] = l.a_map[w].kind == Transition::Kind::Scalar ? l.a_map[w].scalar : 0.0;
        b[w] = l.b_map[w](0, 0);
    }
    const bool check_ref = l.decoder.kind == Decoder::Kind::RoundReadout;
    // Membership in the reference set runs every step; contiguous integer
    // ranges (every compiled model) reduce to two compares, anything else to
    // a sorted lookup.
    std::vector<int> ref_sorted(l.decoder.reference);
    std::sort(ref_sorted.begin(), ref_sorted.end());
    bool ref_contiguous = !ref_sorted.empty();
    for (size_t i = 0; i + 1 < ref_sorted.size(); ++i)
        if (ref_sorted[i + 1] != ref_sorted[i] + 1) ref_contiguous = false;
    const int ref_lo = ref_sorted.empty() ? 0 : ref_sorted.front();
    const int ref_hi = ref_sorted.empty() ? -1 : ref_sorted.back();

    // Uniform grids are cast inline (same arithmetic as CastGrid::cast, which
    // an out-of-line call per step would dominate); explicit grids call
    // through.
    const bool inline_cast = grid != nullptr && grid->is_uniform();
    const double gmin = inline_cast ? grid->min_value() : 0.0;
    const double gstep = inline_cast ? grid->step() : 1.0;
    const double gsteps = inline_cast ? static_cast<double>(grid->num_steps()) : 0.0;
    const double gtop = gmin + gstep * gsteps;

    std::vector<int> out(word.size());
    double h = l.h0(0, 0);
    for (size_t t = 0; t < word.size(); ++t) {
        const int w = word[t];
        require(w >= 0 && w < l.alphabet_size, "model_run: token out of range");
        h = a[w] * h + b[w];
        if (grid) {
            if (inline_cast) {
                require(!std::isnan(h), "cast: NaN input");
                if (h <= gmin) {
                    h = gmin;
                } else if (h >= gtop) {
                    h = gtop;
                } else {
                    // ceil(q) for q in (-1, 2^63) via truncation; avoids a
                    // libm call on targets without a rounding instruction.
                    const double q = (h - gmin) / gstep - 0.5;
                    const double iq = static_cast<double>(static_cast<long long>(q));
                    double k = iq + (q > iq ? 1.0 : 0.0);
                    if (k < 0.0) k = 0.0;
                    if (k > gsteps) k = gsteps;
                    h = gmin + gstep * k;
                }
            } else {
                h = grid->cast(h);
            }
        }
        // Whenever |h - r| < 0.25 for some integer r, every nearest-integer
        // convention returns that r, and otherwise the readout throws below
        // regardless of the convention, so truncation after a half-offset is
        // interchangeable with nearbyint on the checked path.
        const double r =
            check_ref
                ? static_cast<double>(static_cast<long long>(h + std::copysign(0.5, h)))
                : std::nearbyint(h);
        if (check_ref) {
            if (!(std::abs(h - r) < kReadoutTol))
                throw DecodeError("RoundReadout: state entry drifted away from the integer grid");
            const int value = static_cast<int>(r);
            const bool member =
                ref_contiguous ? value >= ref_lo && value <= ref_hi
                               : std::binary_search(ref_sorted.begin(), ref_sorted.end(), value);
            if (!member) throw DecodeError("RoundReadout: value outside the reference set");
        }
        out[t] = static_cast<int>(r);
    }
    return out;
}

std::vector<int> run_impl(const LrnnModel& model, const std::vector<int>& word,
                          const CastGrid* grid) {
    model.validate();
    if (scalar_fast_path_applies(model)) return run_scalar_fast(model, word, grid);

    std::vector<int> tokens = word;
    std::vector<int> decoded;
    for (const auto& layer : model.layers) {
        decoded.assign(tokens.size(), 0);
        DenseMatrix h = layer.h0;
        for (size_t t = 0; t < tokens.size(); ++t) {
            layer_step(layer, tokens[t], h);
            if (grid) cast_state_inplace(*grid, h);
            if (model.renormalize_every > 0 &&
                (t + 1) % static_cast<size_t>(model.renormalize_every) == 0)
                renormalize_columns(h);
            decoded[t] = layer.decoder.decode(h, tokens[t]);
        }
        tokens = decoded;
    }
    return tokens;
}

struct ScanPair {
    DenseMatrix a;  // n x n
    DenseMatrix b;  // n x d
};

ScanPair combine(const ScanPair& second, const ScanPair& first) {
    // first is applied first: H -> A2 (A1 H + B1) + B2.
    return ScanPair{second.a * first.a, second.a * first.b + second.b};
}

// All prefix composites of the segment, combined as a balanced tree.
std::vector<ScanPair> prefix_scan(const std::vector<ScanPair>& pairs, size_t lo, size_t hi) {
    if (hi - lo == 1) return {pairs[lo]};
    const size_t mid = lo + (hi - lo) / 2;
    std::vector<ScanPair> left = prefix_scan(pairs, lo, mid);
    const std::vector<ScanPair> right = prefix_scan(pairs, mid, hi);
    const ScanPair carry = left.back();  // by value: reserve may reallocate
    left.reserve(hi - lo);
    for (const auto& r : right) left.push_back(combine(r, carry));
    return left;
}

}  // namespace

std::vector<int> model_run(const LrnnModel& model, const std::vector<int>& word) {
    return run_impl(model, word, nullptr);
}

std::vector<int> model_run_cast(const LrnnModel& model, const std::vector<int>& word,
                                const CastGrid& grid) {
    return run_impl(model, word, &grid);
}

DenseMatrix sequential_final_state(const LrnnModel& model, const std::vector<int>& word) {
    model.validate();
    if (word.empty()) return model.layers.back().h0;
    std::vector<int> tokens = word;
    DenseMatrix h;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LrnnLayer& layer = model.layers[li];
        const bool feeds_next = li + 1 < model.layers.size();
        h = layer.h0;
        std::vector<int> decoded(tokens.size());
        for (size_t t = 0; t < tokens.size(); ++t) {
            layer_step(layer, tokens[t], h);
            if (model.renormalize_every > 0 &&
                (t + 1) % static_cast<size_t>(model.renormalize_every) == 0)
                renormalize_columns(h);
            if (feeds_next) decoded[t] = layer.decoder.decode(h, tokens[t]);
        }
        tokens = std::move(decoded);
    }
    return h;
}

DenseMatrix scan_eval(const LrnnModel& model, const std::vector<int>& word) {
    model.validate();
    require(model.renormalize_every == 0, "scan_eval: renormalization is sequential-only");
    if (word.empty()) return model.layers.back().h0;
    std::vector<int> tokens = word;
    DenseMatrix final_state;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LrnnLayer& layer = model.layers[li];
        const bool feeds_next = li + 1 < model.layers.size();
        std::vector<ScanPair> pairs;
        pairs.reserve(tokens.size());
        for (int tok : tokens) {
            require(tok >= 0 && tok < layer.alphabet_size, "scan_eval: token out of range");
            pairs.push_back(ScanPair{layer.a_map[tok].realize(), layer.b_map[tok]});
        }
        const std::vector<ScanPair> prefixes = prefix_scan(pairs, 0, pairs.size());
        std::vector<int> decoded(tokens.size());
        for (size_t t = 0; t < tokens.size(); ++t) {
            const DenseMatrix h = prefixes[t].a * layer.h0 + prefixes[t].b;
            if (feeds_next) decoded[t] = layer.decoder.decode(h, tokens[t]);
            if (t + 1 == tokens.size()) final_state = h;
        }
        tokens = std::move(decoded);
    }
    return final_state;
}

}  // namespace statetrack
