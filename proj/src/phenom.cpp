#include "statetrack/phenom.hpp"

#include <cmath>

#include "json.hpp"

namespace statetrack {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

const char* kind_name(DemoKind kind) {
    switch (kind) {
        case DemoKind::PositiveEigs: return "positive_eigs";
        case DemoKind::NegativeReal: return "negative_real";
        case DemoKind::Rotation: return "rotation";
    }
    return "?";
}

bool real_spectrum_kind(const Transition& t) {
    return t.kind == Transition::Kind::Scalar || t.kind == Transition::Kind::Diagonal ||
           t.kind == Transition::Kind::Zero;
}

void check_layer_matches_kind(DemoKind kind, const LrnnLayer& layer, int rotation_m) {
    switch (kind) {
        case DemoKind::PositiveEigs:
            for (const auto& t : layer.a_map) {
                require(t.kind != Transition::Kind::Full,
                        "demo_theorem: positive_eigs expects scalar/diagonal/GH transitions");
                require(t.min_real_eigenvalue_bound() >= -1e-12,
                        "demo_theorem: positive_eigs layer has a negative eigenvalue");
            }
            break;
        case DemoKind::NegativeReal:
            for (const auto& t : layer.a_map)
                require(real_spectrum_kind(t),
                        "demo_theorem: negative_real expects scalar/diagonal transitions");
            break;
        case DemoKind::Rotation: {
            require(rotation_m >= 2, "demo_theorem: rotation kind needs m >= 2");
            require(layer.state_rows() == 2 && layer.state_cols() == 1,
                    "demo_theorem: rotation kind expects a 2-D column state");
            const DenseMatrix want = rotation2(2.0 * kPi / rotation_m);
            require(layer.a_map[1].realize().max_abs_diff(want) <= 1e-9,
                    "demo_theorem: token-1 transition is not the requested rotation");
            break;
        }
    }
}

// Per-step finite-precision orbit on constant token 1.
std::vector<DenseMatrix> cast_orbit(const LrnnLayer& layer, const CastGrid& grid,
                                    long long k_max) {
    std::vector<DenseMatrix> states;
    states.reserve(static_cast<size_t>(k_max));
    DenseMatrix h = cast_state(grid, layer.h0);
    for (long long k = 0; k < k_max; ++k) {
        layer_step(layer, 1, h);
        cast_state_inplace(grid, h);
        states.push_back(h);
    }
    return states;
}

// Power-form orbit for scalar/diagonal transitions: the step-k state is
// cast(sum_{i<k} cast(a^i b) + cast(a^k h0)), with the sum kept incrementally.
std::vector<DenseMatrix> power_cast_orbit(const LrnnLayer& layer, const CastGrid& grid,
                                          long long k_max) {
    const Transition& t = layer.a_map[1];
    const int n = layer.state_rows();
    std::vector<double> a(n);
    if (t.kind == Transition::Kind::Scalar) {
        a.assign(n, t.scalar);
    } else if (t.kind == Transition::Kind::Diagonal) {
        a = t.diag;
    } else {
        a.assign(n, 0.0);  // Zero
    }
    const DenseMatrix& b = layer.b_map[1];
    std::vector<double> power(n, 1.0);  // a^k, exact float powers
    std::vector<double> run_sum(n, 0.0);
    std::vector<DenseMatrix> states;
    states.reserve(static_cast<size_t>(k_max));
    DenseMatrix h(n, 1);
    for (long long k = 1; k <= k_max; ++k) {
        for (int i = 0; i < n; ++i) {
            run_sum[i] += grid.cast(power[i] * b(i, 0));
            power[i] *= a[i];
            h(i, 0) = grid.cast(run_sum[i] + grid.cast(power[i] * layer.h0(i, 0)));
        }
        states.push_back(h);
    }
    return states;
}

}  // namespace

std::optional<PeriodFinding> eventual_period(const std::vector<DenseMatrix>& states,
                                             long long max_period) {
    require(!states.empty(), "eventual_period: empty state sequence");
    require(max_period >= 1, "eventual_period: max_period must be positive");
    const long long n = static_cast<long long>(states.size());
    for (long long p = 1; p <= max_period && 3 * p <= n; ++p) {
        // Earliest t0 for this p: everything after the last mismatch.
        long long t0 = 0;
        for (long long t = n - 1 - p; t >= 0; --t) {
            if (!(states[static_cast<size_t>(t)] == states[static_cast<size_t>(t + p)])) {
                t0 = t + 1;
                break;
            }
        }
        if (n - t0 >= 3 * p) return PeriodFinding{t0, p};
    }
    return std::nullopt;
}

std::string DemoReport::to_json_text() const {
    nlohmann::json j;
    j["kind"] = kind_name(kind);
    if (kind == DemoKind::Rotation) j["rotation_m"] = rotation_m;
    j["found"] = found;
    j["tail_start"] = tail_start;
    j["period"] = period;
    j["verdict"] = verdict;
    if (power_mode_ran) {
        j["power_mode"] = {{"found", power_found},
                           {"tail_start", power_tail_start},
                           {"period", power_period},
                           {"agrees", modes_agree}};
    }
    return j.dump();
}

DemoReport demo_theorem(DemoKind kind, const LrnnLayer& layer, const CastGrid& grid,
                        long long k_max, int rotation_m, long long max_period) {
    layer.validate();
    require(layer.alphabet_size >= 2, "demo_theorem: layer must accept token 1");
    require(k_max >= 3, "demo_theorem: k_max too small to confirm any period");
    check_layer_matches_kind(kind, layer, rotation_m);

    DemoReport report;
    report.kind = kind;
    report.rotation_m = rotation_m;

    const auto finding = eventual_period(cast_orbit(layer, grid, k_max), max_period);
    if (finding) {
        report.found = true;
        report.tail_start = finding->tail_start;
        report.period = finding->period;
    }
    switch (kind) {
        case DemoKind::PositiveEigs: report.verdict = report.found && report.period == 1; break;
        case DemoKind::NegativeReal: report.verdict = report.found && report.period <= 2; break;
        case DemoKind::Rotation:
            report.verdict = report.found && report.period == rotation_m;
            break;
    }

    if (real_spectrum_kind(layer.a_map[1])) {
        report.power_mode_ran = true;
        const auto power = eventual_period(power_cast_orbit(layer, grid, k_max), max_period);
        if (power) {
            report.power_found = true;
            report.power_tail_start = power->tail_start;
            report.power_period = power->period;
        }
        report.modes_agree = report.found && report.power_found &&
                             report.period == report.power_period;
    }
    return report;
}

namespace {

Transition identity_like(const Transition& t, int n) {
    switch (t.kind) {
        case Transition::Kind::Scalar: return Transition::make_scalar(1.0);
        case Transition::Kind::Diagonal: return Transition::make_diagonal(std::vector<double>(n, 1.0));
        default: return Transition::make_gh(GhProduct(n));
    }
}

LrnnLayer wrap_demo_layer(Transition active, int n, Rng& rng) {
    LrnnLayer layer;
    layer.alphabet_size = 2;
    layer.h0 = DenseMatrix(n, 1);
    for (int i = 0; i < n; ++i) layer.h0(i, 0) = rng.uniform(-2.0, 2.0);
    DenseMatrix b(n, 1);
    for (int i = 0; i < n; ++i) b(i, 0) = rng.uniform(-1.0, 1.0);
    layer.a_map.push_back(identity_like(active, n));
    layer.a_map.push_back(std::move(active));
    layer.b_map.push_back(DenseMatrix(n, 1));
    layer.b_map.push_back(std::move(b));
    layer.decoder = n == 1 ? Decoder::pass_through()
                           : Decoder::argmax_dot({{1.0, 0.0}, {0.0, 1.0}}, {0, 1});
    if (n > 2)
        layer.decoder = Decoder::argmax_dot(
            {std::vector<double>(n, 1.0), std::vector<double>(n, -1.0)}, {0, 1});
    return layer;
}

std::vector<double> unit_vector(Rng& rng, int n) {
    std::vector<double> v(n);
    double s = 0.0;
    while (s < 1e-6) {
        for (auto& x : v) x = rng.normal();
        s = 0.0;
        for (double x : v) s += x * x;
    }
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
}

}  // namespace

LrnnLayer sample_positive_layer(Rng& rng) {
    const int n = rng.range_int(1, 3);
    Transition active;
    if (n == 1 || rng.coin()) {
        std::vector<double> d(n);
        for (auto& x : d) x = rng.uniform(0.0, 0.999);
        active = n == 1 ? Transition::make_scalar(d[0]) : Transition::make_diagonal(std::move(d));
    } else {
        // One or two GH factors with distinguished eigenvalues in [0.001, 1]:
        // products of at most two such factors keep a real [0, 1] spectrum.
        const int k = rng.range_int(1, 2);
        std::vector<GhFactor> fs;
        for (int i = 0; i < k; ++i) fs.emplace_back(unit_vector(rng, n), rng.uniform(0.0, 0.999));
        active = Transition::make_gh(GhProduct(n, std::move(fs)));
    }
    return wrap_demo_layer(std::move(active), n, rng);
}

LrnnLayer sample_negative_layer(Rng& rng) {
    const int n = rng.range_int(1, 3);
    std::vector<double> d(n);
    for (auto& x : d) x = rng.uniform(-0.999, 0.999);
    d[rng.range_int(0, n - 1)] = rng.uniform(-0.999, -0.05);  // force a negative eigenvalue
    Transition active =
        n == 1 ? Transition::make_scalar(d[0]) : Transition::make_diagonal(std::move(d));
    return wrap_demo_layer(std::move(active), n, rng);
}

LrnnLayer rotation_demo_layer(int m) {
    require(m >= 2, "rotation_demo_layer: m must be at least 2");
    LrnnLayer layer;
    layer.alphabet_size = 2;
    layer.h0 = DenseMatrix(2, 1);
    layer.h0(0, 0) = 1.0;
    layer.a_map.push_back(Transition::make_gh(GhProduct(2)));
    layer.a_map.push_back(Transition::make_gh(rotation_as_householders(2.0 * kPi / m)));
    layer.b_map.push_back(DenseMatrix(2, 1));
    layer.b_map.push_back(DenseMatrix(2, 1));
    layer.decoder = Decoder::argmax_dot({{1.0, 0.0}, {0.0, 1.0}}, {0, 1});
    return layer;
}

}  // namespace statetrack
