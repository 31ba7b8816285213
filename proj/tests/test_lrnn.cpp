#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "statetrack/fsa.hpp"
#include "statetrack/lrnn.hpp"
#include "statetrack/rng.hpp"

using namespace statetrack;

namespace {

// Oracle: run one layer naively on dense matrices, optionally casting.
std::vector<DenseMatrix> naive_layer_states(const LrnnLayer& layer, const std::vector<int>& word,
                                            const CastGrid* grid) {
    std::vector<DenseMatrix> states;
    DenseMatrix h = layer.h0;
    for (int tok : word) {
        h = layer.a_map[tok].realize() * h + layer.b_map[tok];
        if (grid) cast_state_inplace(*grid, h);
        states.push_back(h);
    }
    return states;
}

// Oracle: full multi-layer run on dense matrices.
std::vector<int> naive_model_run(const LrnnModel& model, const std::vector<int>& word,
                                 const CastGrid* grid) {
    std::vector<int> tokens = word;
    std::vector<int> outputs;
    for (const auto& layer : model.layers) {
        outputs.clear();
        DenseMatrix h = layer.h0;
        for (int tok : tokens) {
            h = layer.a_map[tok].realize() * h + layer.b_map[tok];
            if (grid) cast_state_inplace(*grid, h);
            outputs.push_back(layer.decoder.decode(h, tok));
        }
        tokens = outputs;
    }
    return outputs;
}

LrnnLayer random_full_layer(Rng& rng, int alphabet, int n, int cols) {
    LrnnLayer layer;
    layer.alphabet_size = alphabet;
    layer.h0 = DenseMatrix(n, cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cols; ++j) layer.h0(i, j) = rng.uniform(-1.0, 1.0);
    for (int w = 0; w < alphabet; ++w) {
        DenseMatrix a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-0.4, 0.4);
        layer.a_map.push_back(Transition::make_full(std::move(a)));
        DenseMatrix b(n, cols);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cols; ++j) b(i, j) = rng.uniform(-0.5, 0.5);
        layer.b_map.push_back(std::move(b));
    }
    layer.decoder = Decoder::pass_through();
    return layer;
}

}  // namespace

TEST_CASE("transition factories validate bounds") {
    CHECK_NOTHROW(Transition::make_scalar(1.0));
    CHECK_NOTHROW(Transition::make_scalar(-1.0));
    CHECK_THROWS_AS(Transition::make_scalar(1.5), ContractError);
    CHECK_NOTHROW(Transition::make_scalar(1.5, true));

    CHECK_NOTHROW(Transition::make_diagonal({0.5, -1.0}));
    CHECK_THROWS_AS(Transition::make_diagonal({0.5, -1.2}), ContractError);
    CHECK_NOTHROW(Transition::make_diagonal({3.0}, true));
    CHECK_THROWS_AS(Transition::make_diagonal({}), ContractError);

    DenseMatrix big = DenseMatrix::from_rows({{0.0, 2.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(Transition::make_full(big), ContractError);
    CHECK_NOTHROW(Transition::make_full(big, true));
    CHECK_NOTHROW(Transition::make_full(rotation2(0.3)));
}

TEST_CASE("transition apply matches dense realize") {
    Rng rng(51);
    std::vector<Transition> ts;
    ts.push_back(Transition::make_scalar(-0.7));
    ts.push_back(Transition::make_diagonal({0.9, -0.2, 0.4}));
    ts.push_back(Transition::make_gh(rotation_as_householders(1.1)));
    ts.push_back(Transition::make_full(DenseMatrix::from_rows({{0.1, 0.2}, {-0.3, 0.4}})));
    ts.push_back(Transition::make_zero(3));
    for (const auto& t : ts) {
        const int n = t.realize().rows();
        DenseMatrix h(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 2; ++j) h(i, j) = rng.uniform(-2.0, 2.0);
        DenseMatrix expect = t.realize() * h;
        DenseMatrix got = h;
        t.apply(got);
        CHECK(got.max_abs_diff(expect) < 1e-12);
    }
    CHECK(Transition::make_zero(2).realize().max_abs_diff(DenseMatrix(2, 2)) == 0.0);
    CHECK(Transition::make_scalar(0.5).realize()(0, 0) == 0.5);
}

TEST_CASE("transition min real eigenvalue bound") {
    CHECK(Transition::make_scalar(-1.0).min_real_eigenvalue_bound() == -1.0);
    CHECK(Transition::make_scalar(0.3).min_real_eigenvalue_bound() == 0.3);
    CHECK(Transition::make_diagonal({0.5, -0.25, 1.0}).min_real_eigenvalue_bound() == -0.25);
    CHECK(Transition::make_zero(3).min_real_eigenvalue_bound() == 0.0);
    // GH bound is the smallest distinguished eigenvalue across factors.
    GhProduct p(2, {GhFactor({1.0, 0.0}, 2.0), GhFactor({0.0, 1.0}, 0.5)});
    CHECK(Transition::make_gh(std::move(p)).min_real_eigenvalue_bound() == -1.0);
    CHECK(Transition::make_gh(GhProduct(2)).min_real_eigenvalue_bound() == 1.0);
    // Full uses the actual spectrum (real parts).
    CHECK(Transition::make_full(DenseMatrix::from_rows({{-0.5, 0.0}, {0.0, 0.25}}))
              .min_real_eigenvalue_bound() == doctest::Approx(-0.5));
}

TEST_CASE("argmax dot decoder") {
    Decoder d = Decoder::argmax_dot({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}}, {10, 20, 30});
    DenseMatrix h(2, 1);
    h(0, 0) = 0.9;
    h(1, 0) = 0.2;
    CHECK(d.decode(h, 0) == 10);
    h(0, 0) = -3.0;
    CHECK(d.decode(h, 0) == 30);
    h(0, 0) = 0.0;
    h(1, 0) = 0.0;  // all dots tie at 0; lowest index wins
    CHECK(d.decode(h, 5) == 10);
    CHECK_THROWS_AS(Decoder::argmax_dot({{1.0}}, {1, 2}), ContractError);
    CHECK_THROWS_AS(Decoder::argmax_dot({}, {}), ContractError);
    CHECK_THROWS_AS(Decoder::argmax_dot({{1.0}, {1.0, 2.0}}, {1, 2}), ContractError);
}

TEST_CASE("round readout decoder, scalar mode") {
    Decoder d = Decoder::round_readout({0, 1});
    DenseMatrix h(1, 1);
    h(0, 0) = 0.9999;
    CHECK(d.decode(h, 0) == 1);
    h(0, 0) = 0.1;
    CHECK(d.decode(h, 0) == 0);
    h(0, 0) = 0.4;  // too far from any integer
    CHECK_THROWS_AS(d.decode(h, 0), DecodeError);
    h(0, 0) = 2.0;  // rounds fine but 2 is not in the reference set
    CHECK_THROWS_AS(d.decode(h, 0), DecodeError);
}

TEST_CASE("round readout decoder, permutation mode") {
    // Reference (1,2,3); state holds a permutation of it. The state relates to
    // the tracked permutation p by h_i = p^{-1}(i) + 1, so the decoder inverts
    // before ranking.
    Decoder d = Decoder::round_readout({1, 2, 3});
    Rng rng(52);
    Permutation p = {2, 0, 1};
    DenseMatrix h(3, 1);
    for (int i = 0; i < 3; ++i) h(p[i], 0) = i + 1 + rng.uniform(-0.2, 0.2);
    // h(p(i)) = i+1 means h_j = p^{-1}(j) + 1; decoder should report rank(p).
    CHECK(d.decode(h, 0) == static_cast<int>(perm_rank(p)));
    h(0, 0) = 1.0;
    h(1, 0) = 1.0;
    h(2, 0) = 2.0;  // not a permutation of 1..3
    CHECK_THROWS_AS(d.decode(h, 0), DecodeError);
    h(2, 0) = 2.6;  // entry too far from integer
    CHECK_THROWS_AS(d.decode(h, 0), DecodeError);
}

TEST_CASE("pass through and pair_with_token decoders") {
    Decoder pt = Decoder::pass_through();
    DenseMatrix h(1, 1);
    h(0, 0) = -2.2;
    CHECK(pt.decode(h, 9) == -2);
    h(0, 0) = 3.6;
    CHECK(pt.decode(h, 9) == 4);

    // pair_with_token with 1-hot states and offset 1: readout (1..n).h is the
    // 1-based index of the hot entry.
    Decoder pw = Decoder::pair_with_token(3, 1);
    DenseMatrix e(3, 1);
    e(1, 0) = 1.0;  // state 1 (0-based), readout 2
    CHECK(pw.decode(e, 2) == 2 * 3 + 1);
    e(1, 0) = 0.0;
    e(0, 0) = 1.0;
    CHECK(pw.decode(e, 0) == 0);
    // offset 0 with scalar parity state.
    Decoder pw0 = Decoder::pair_with_token(2, 0);
    DenseMatrix s(1, 1);
    s(0, 0) = 1.0;
    CHECK(pw0.decode(s, 3) == 3 * 2 + 1);
    s(0, 0) = 0.0;
    CHECK(pw0.decode(s, 3) == 3 * 2 + 0);
    s(0, 0) = 2.0;  // readout out of range for num_state_values = 2
    CHECK_THROWS_AS(pw0.decode(s, 0), DecodeError);
}

TEST_CASE("layer_step applies transition then bias") {
    LrnnLayer layer;
    layer.alphabet_size = 1;
    layer.h0 = DenseMatrix::from_rows({{1.0}, {2.0}});
    layer.a_map.push_back(Transition::make_full(rotation2(0.4)));
    layer.b_map.push_back(DenseMatrix::from_rows({{0.5}, {-0.5}}));
    layer.decoder = Decoder::pass_through();
    DenseMatrix h = layer.h0;
    layer_step(layer, 0, h);
    DenseMatrix expect = rotation2(0.4) * layer.h0 + layer.b_map[0];
    CHECK(h.max_abs_diff(expect) < 1e-15);
    CHECK_THROWS_AS(layer_step(layer, 1, h), ContractError);
    CHECK_THROWS_AS(layer_step(layer, -1, h), ContractError);
}

TEST_CASE("model validation") {
    LrnnModel model;
    CHECK_THROWS_AS(model.validate(), ContractError);  // no layers

    Rng rng(53);
    LrnnLayer layer = random_full_layer(rng, 3, 2, 1);
    model.layers.push_back(layer);
    CHECK_NOTHROW(model.validate());

    model.layers[0].b_map[1] = DenseMatrix(3, 1);  // wrong shape
    CHECK_THROWS_AS(model.validate(), ContractError);
    model.layers[0] = layer;
    model.layers[0].a_map.pop_back();  // missing transition
    CHECK_THROWS_AS(model.validate(), ContractError);
}

TEST_CASE("model_run matches naive oracle on random stacks") {
    Rng rng(54);
    for (int trial = 0; trial < 10; ++trial) {
        LrnnModel model;
        // First layer: random full transitions, pass-through into a second
        // layer keyed by rounded outputs shifted into token range. To keep the
        // wiring valid, clamp layer 1 outputs via an argmax decoder instead.
        LrnnLayer l1 = random_full_layer(rng, 4, 3, 1);
        l1.decoder = Decoder::argmax_dot({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}},
                                         {0, 1, 2});
        model.layers.push_back(l1);
        LrnnLayer l2 = random_full_layer(rng, 3, 2, 1);
        l2.decoder = Decoder::argmax_dot({{1.0, 0.0}, {0.0, 1.0}}, {0, 1});
        model.layers.push_back(l2);
        model.validate();

        std::vector<int> word;
        for (int i = 0; i < 40; ++i) word.push_back(rng.range_int(0, 3));
        CHECK(model_run(model, word) == naive_model_run(model, word, nullptr));

        CastGrid grid = CastGrid::uniform(-4.0, 4.0, 1.0 / 64.0);
        CHECK(model_run_cast(model, word, grid) == naive_model_run(model, word, &grid));
    }
}

TEST_CASE("model_run rejects out-of-range tokens") {
    Rng rng(55);
    LrnnModel model;
    model.layers.push_back(random_full_layer(rng, 2, 2, 1));
    CHECK_THROWS_AS(model_run(model, {0, 2}), ContractError);
}

TEST_CASE("cast run differs from exact run when the grid is coarse") {
    // A contraction toward zero: exact state decays geometrically, cast state
    // snaps to the grid and stalls.
    LrnnLayer layer;
    layer.alphabet_size = 1;
    layer.h0 = DenseMatrix::from_rows({{1.0}});
    layer.a_map.push_back(Transition::make_scalar(0.9));
    layer.b_map.push_back(DenseMatrix(1, 1));
    layer.decoder = Decoder::pass_through();
    LrnnModel model;
    model.layers.push_back(layer);
    std::vector<int> word(64, 0);
    CastGrid coarse = CastGrid::uniform(-1.0, 1.0, 0.25);
    auto exact = model_run(model, word);
    auto cast_out = model_run_cast(model, word, coarse);
    CHECK(exact.back() == 0);
    // 0.9 * 1 = 0.9 casts to 1.0 forever: the cast run is stuck at 1.
    CHECK(cast_out.back() == 1);
}

TEST_CASE("renormalization keeps unit-sphere states on the sphere") {
    // Rotation dynamics with a deliberately perturbed transition: without
    // renormalization the norm drifts geometrically; with it, the state stays
    // within one step of the sphere.
    LrnnLayer layer;
    layer.alphabet_size = 1;
    layer.h0 = DenseMatrix::from_rows({{1.0}, {0.0}});
    layer.a_map.push_back(Transition::make_full(0.999 * rotation2(0.37), true));
    layer.b_map.push_back(DenseMatrix(2, 1));
    layer.decoder = Decoder::pass_through();
    LrnnModel drift;
    drift.layers.push_back(layer);
    LrnnModel kept = drift;
    kept.renormalize_every = 1;

    std::vector<int> word(2000, 0);
    DenseMatrix end_drift = sequential_final_state(drift, word);
    DenseMatrix end_kept = sequential_final_state(kept, word);
    CHECK(end_drift.frobenius_norm() < 0.2);  // 0.999^2000 ~ 0.135
    CHECK(end_kept.frobenius_norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scan_eval equals sequential evaluation") {
    Rng rng(56);
    for (int trial = 0; trial < 8; ++trial) {
        LrnnModel model;
        LrnnLayer l1 = random_full_layer(rng, 3, 3, 1);
        l1.decoder = Decoder::argmax_dot({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {0, 1});
        model.layers.push_back(l1);
        LrnnLayer l2 = random_full_layer(rng, 2, 2, 1);
        model.layers.push_back(l2);
        model.validate();
        const int len = rng.range_int(1, 33);
        std::vector<int> word;
        for (int i = 0; i < len; ++i) word.push_back(rng.range_int(0, 2));
        DenseMatrix a = scan_eval(model, word);
        DenseMatrix b = sequential_final_state(model, word);
        CHECK(a.max_abs_diff(b) < 1e-10);
    }
    // GH transitions go through the same path.
    LrnnModel cyc;
    LrnnLayer layer;
    layer.alphabet_size = 2;
    layer.h0 = DenseMatrix::from_rows({{1.0}, {0.0}});
    layer.a_map.push_back(Transition::make_gh(rotation_as_householders(0.0)));
    layer.a_map.push_back(Transition::make_gh(rotation_as_householders(2.0)));
    layer.b_map.push_back(DenseMatrix(2, 1));
    layer.b_map.push_back(DenseMatrix(2, 1));
    layer.decoder = Decoder::pass_through();
    cyc.layers.push_back(layer);
    std::vector<int> w = {1, 0, 1, 1, 0, 1};
    CHECK(scan_eval(cyc, w).max_abs_diff(sequential_final_state(cyc, w)) < 1e-12);
    // Empty input returns h0 of the last layer.
    CHECK(scan_eval(cyc, {}).max_abs_diff(cyc.layers[0].h0) == 0.0);
}

TEST_CASE("model json round trip preserves behavior") {
    Rng rng(57);
    LrnnModel model;
    LrnnLayer l1;
    l1.alphabet_size = 2;
    l1.h0 = DenseMatrix::from_rows({{1.0}, {0.0}});
    l1.a_map.push_back(Transition::make_gh(rotation_as_householders(1.3)));
    l1.a_map.push_back(Transition::make_diagonal({0.5, -0.5}));
    l1.b_map.push_back(DenseMatrix::from_rows({{0.25}, {0.0}}));
    l1.b_map.push_back(DenseMatrix(2, 1));
    l1.decoder = Decoder::argmax_dot({{1.0, 0.0}, {0.0, 1.0}}, {0, 1});
    model.layers.push_back(l1);
    LrnnLayer l2;
    l2.alphabet_size = 2;
    l2.h0 = DenseMatrix::from_rows({{0.0}});
    l2.a_map.push_back(Transition::make_scalar(1.0));
    l2.a_map.push_back(Transition::make_zero(1));
    l2.b_map.push_back(DenseMatrix::from_rows({{1.0}}));
    l2.b_map.push_back(DenseMatrix(1, 1));
    l2.decoder = Decoder::pass_through();
    model.layers.push_back(l2);
    model.renormalize_every = 7;
    model.validate();

    LrnnModel back = LrnnModel::from_json_text(model.to_json_text());
    back.validate();
    CHECK(back.renormalize_every == 7);
    CHECK(back.layers.size() == 2);
    std::vector<int> word;
    for (int i = 0; i < 50; ++i) word.push_back(rng.range_int(0, 1));
    CHECK(model_run(back, word) == model_run(model, word));
    // Exact weight preservation, not just behavior.
    CHECK(back.layers[0].b_map[0](0, 0) == 0.25);
    CHECK(back.layers[0].a_map[1].diag == std::vector<double>{0.5, -0.5});

    CHECK_THROWS_AS(LrnnModel::from_json_text("{}"), ContractError);
    CHECK_THROWS_AS(LrnnModel::from_json_text(R"({"format":"other","layers":[]})"),
                    ContractError);
}
