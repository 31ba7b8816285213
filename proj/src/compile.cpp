#include "statetrack/compile.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace statetrack {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Refuses transitions whose guaranteed-real eigenvalues dip below 0 when the
// construction is restricted to the [0, 1] range.
Transition gate(Transition t, const CompileOptions& options) {
    if (options.restrict_unit_interval) {
        const double lo = t.min_real_eigenvalue_bound();
        if (lo < -1e-12)
            throw EigenRangeError(
                "construction needs a transition eigenvalue of " + std::to_string(lo) +
                ", outside the configured [0, 1] range");
    }
    return t;
}

Transition zero_transition(int n, const CompileOptions& options) {
    if (!options.strict_gh) return gate(Transition::make_zero(n), options);
    // Explicit GH form of the zero map: (I - e_n e_n^T) ... (I - e_1 e_1^T).
    std::vector<GhFactor> fs;
    fs.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> e(n, 0.0);
        e[i] = 1.0;
        fs.emplace_back(std::move(e), 1.0);
    }
    return gate(Transition::make_gh(GhProduct(n, std::move(fs))), options);
}

DenseMatrix column(const std::vector<double>& entries) {
    DenseMatrix m(static_cast<int>(entries.size()), 1);
    for (size_t i = 0; i < entries.size(); ++i) m(static_cast<int>(i), 0) = entries[i];
    return m;
}

GhFactor reflection_factor(double alpha) {
    // H(alpha) = I - 2 v v^T with v = (-sin(alpha/2), cos(alpha/2)).
    return GhFactor({-std::sin(alpha / 2.0), std::cos(alpha / 2.0)}, 2.0);
}

}  // namespace

LrnnModel compile_parity(const CompileOptions& options) {
    LrnnLayer layer;
    layer.alphabet_size = 2;
    layer.h0 = column({0.0});
    layer.a_map.push_back(gate(Transition::make_scalar(1.0), options));
    layer.a_map.push_back(gate(Transition::make_scalar(-1.0), options));
    layer.b_map.push_back(column({0.0}));
    layer.b_map.push_back(column({1.0}));
    layer.decoder = Decoder::round_readout({0, 1});

    LrnnModel model;
    model.layers.push_back(std::move(layer));
    model.validate();
    return model;
}

LrnnModel compile_cyclic(int m, const CompileOptions& options) {
    require(m >= 2, "compile_cyclic: modulus must be at least 2");
    const double theta = 2.0 * kPi / m;

    LrnnLayer layer;
    layer.alphabet_size = m;
    layer.h0 = column({1.0, 0.0});
    for (int w = 0; w < m; ++w) {
        layer.a_map.push_back(gate(Transition::make_gh(rotation_as_householders(theta * w)), options));
        layer.b_map.push_back(DenseMatrix(2, 1));
    }
    std::vector<std::vector<double>> prototypes;
    std::vector<int> labels;
    for (int i = 0; i < m; ++i) {
        prototypes.push_back(matvec(rotation2(theta * i), {1.0, 0.0}));
        labels.push_back(i);
    }
    layer.decoder = Decoder::argmax_dot(std::move(prototypes), std::move(labels));

    LrnnModel model;
    model.layers.push_back(std::move(layer));
    model.validate();
    return model;
}

LrnnModel compile_permutation_group(int n, const std::vector<Permutation>& generators,
                                    const CompileOptions& options) {
    require(n >= 1 && n <= 12, "compile_permutation_group: supported degrees are 1..12");
    require(!generators.empty(), "compile_permutation_group: needs at least one generator");

    LrnnLayer layer;
    layer.alphabet_size = static_cast<int>(generators.size());
    std::vector<double> h0(n);
    std::vector<int> reference(n);
    for (int i = 0; i < n; ++i) {
        h0[i] = i + 1;
        reference[i] = i + 1;
    }
    layer.h0 = column(h0);
    for (const auto& g : generators) {
        require(static_cast<int>(g.size()) == n && is_permutation(g),
                "compile_permutation_group: generator is not a permutation of the right degree");
        std::vector<GhFactor> fs;
        for (const auto& [i, j] : perm_to_transpositions(g)) fs.push_back(swap_householder(i, j, n));
        layer.a_map.push_back(gate(Transition::make_gh(GhProduct(n, std::move(fs))), options));
        layer.b_map.push_back(DenseMatrix(n, 1));
    }
    layer.decoder = Decoder::round_readout(std::move(reference));

    LrnnModel model;
    model.layers.push_back(std::move(layer));
    model.validate();
    return model;
}

LrnnModel compile_mod_reflections(int m, const CompileOptions& options) {
    require(m >= 2, "compile_mod_reflections: modulus must be at least 2");

    // Layer 1: step-parity counter h_t = 1 - h_{t-1} (h0 = 0), emitted as the
    // pair code 2 * token + h_t.
    LrnnLayer first;
    first.alphabet_size = m;
    first.h0 = column({0.0});
    for (int w = 0; w < m; ++w) {
        first.a_map.push_back(gate(Transition::make_scalar(-1.0), options));
        first.b_map.push_back(column({1.0}));
    }
    first.decoder = Decoder::pair_with_token(2, 0);

    // Layer 2: one reflection per (digit, parity) code.
    LrnnLayer second;
    second.alphabet_size = 2 * m;
    second.h0 = column({1.0, 0.0});
    for (int code = 0; code < 2 * m; ++code) {
        const int digit = code / 2;
        const int parity = code % 2;
        const double alpha = (parity == 1) ? (1.0 - 2.0 * digit) * kPi / m
                                           : (1.0 + 2.0 * digit) * kPi / m;
        second.a_map.push_back(
            gate(Transition::make_gh(GhProduct(2, {reflection_factor(alpha)})), options));
        second.b_map.push_back(DenseMatrix(2, 1));
    }
    // Prototypes: d_i = R(2 i pi / m) d0 and c_i = R(-2 i pi / m) c0 with
    // c0 = H(pi / m) d0; both families carry label i. The state equals c_{s}
    // after odd steps and d_{s} after even steps, s the running sum mod m.
    const std::vector<double> d0 = {1.0, 0.0};
    const std::vector<double> c0 = matvec(reflection2(kPi / m), d0);
    std::vector<std::vector<double>> prototypes;
    std::vector<int> labels;
    for (int i = 0; i < m; ++i) {
        prototypes.push_back(matvec(rotation2(2.0 * kPi * i / m), d0));
        labels.push_back(i);
    }
    for (int i = 0; i < m; ++i) {
        prototypes.push_back(matvec(rotation2(-2.0 * kPi * i / m), c0));
        labels.push_back(i);
    }
    second.decoder = Decoder::argmax_dot(std::move(prototypes), std::move(labels));

    LrnnModel model;
    model.layers.push_back(std::move(first));
    model.layers.push_back(std::move(second));
    model.validate();
    return model;
}

LrnnModel cascade_to_lrnn(const Cascade& cascade, const CompileOptions& options) {
    cascade.validate();
    LrnnModel model;
    for (const Fsa& fsa : cascade.layers) {
        const int n = fsa.num_states;
        LrnnLayer layer;
        layer.alphabet_size = fsa.alphabet_size;
        std::vector<double> h0(n, 0.0);
        h0[fsa.start] = 1.0;
        layer.h0 = column(h0);

        for (int w = 0; w < fsa.alphabet_size; ++w) {
            std::vector<int> image(n);
            for (int q = 0; q < n; ++q) image[q] = fsa.delta[q][w];
            const bool constant =
                std::all_of(image.begin(), image.end(), [&](int s) { return s == image[0]; });
            if (is_permutation(image) && (!constant || n == 1)) {
                std::vector<GhFactor> fs;
                for (const auto& [i, j] : perm_to_transpositions(image))
                    fs.push_back(swap_householder(i, j, n));
                layer.a_map.push_back(gate(Transition::make_gh(GhProduct(n, std::move(fs))), options));
                layer.b_map.push_back(DenseMatrix(n, 1));
            } else if (constant) {
                layer.a_map.push_back(zero_transition(n, options));
                std::vector<double> b(n, 0.0);
                b[image[0]] = 1.0;
                layer.b_map.push_back(column(b));
            } else {
                throw ContractError(
                    "cascade_to_lrnn: letter is neither a permutation nor a reset");
            }
        }
        layer.decoder = Decoder::pair_with_token(n, 1);
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

}  // namespace statetrack
