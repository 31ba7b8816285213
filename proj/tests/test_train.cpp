#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "statetrack/compile.hpp"
#include "statetrack/train.hpp"

using namespace statetrack;

namespace {

TrainableSpec tiny_spec(LayerKind kind, EigenRange range, int layers = 1, int d = 4, int vocab = 3,
                        int n_out = 3) {
    TrainableSpec spec;
    spec.vocab = vocab;
    spec.n_out = n_out;
    spec.d_model = d;
    for (int i = 0; i < layers; ++i) spec.layers.push_back({kind, range});
    return spec;
}

std::vector<Sample> random_batch(Rng& rng, int count, int len, int vocab, int n_out) {
    std::vector<Sample> batch;
    for (int i = 0; i < count; ++i) {
        Sample s;
        for (int t = 0; t < len; ++t) {
            s.tokens.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(vocab))));
            s.labels.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(n_out))));
            s.mask.push_back(1);
        }
        batch.push_back(std::move(s));
    }
    return batch;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(TrainableModel::build(TrainableSpec{}, 1), ContractError);  // no layers
    TrainableSpec bad = tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric);
    bad.vocab = 1;
    CHECK_THROWS_AS(TrainableModel::build(bad, 1), ContractError);
    TrainableSpec two_full = tiny_spec(LayerKind::FullMatrix, EigenRange::Symmetric, 2);
    CHECK_THROWS_AS(TrainableModel::build(two_full, 1), ContractError);
}

TEST_CASE("build is deterministic and zero readout gives uniform logits") {
    const TrainableSpec spec = tiny_spec(LayerKind::Delta, EigenRange::Symmetric, 2, 6);
    TrainableModel a = TrainableModel::build(spec, 9);
    TrainableModel b = TrainableModel::build(spec, 9);
    TrainableModel c = TrainableModel::build(spec, 10);
    CHECK(a.params.values == b.params.values);
    CHECK(a.params.values != c.params.values);

    ForwardResult fr = forward(a, {{0, 1, 2, 1}, {2, 2}});
    for (const Eigen::MatrixXd& lg : fr.logits) {
        for (int t = 0; t < lg.cols(); ++t) {
            for (int i = 0; i < lg.rows(); ++i) CHECK(lg(i, t) == 0.0);
        }
    }
    CHECK_THROWS_AS(forward(a, {{0, 3, 1}}), ContractError);  // token out of vocab
    CHECK_THROWS_AS(forward(a, {{}}), ContractError);
}

TEST_CASE("transition values stay inside the advertised eigenvalue ranges") {
    // The parameterizations map any preactivation into the eigenvalue range;
    // probe the formulas over widely scaled random inputs.
    Rng rng(21);
    for (int i = 0; i < 10000; ++i) {
        const double z = rng.uniform(-60.0, 60.0);
        const double unit = sigmoid(z);
        const double sym = 2.0 * sigmoid(z) - 1.0;
        CHECK(unit >= 0.0);
        CHECK(unit <= 1.0);
        CHECK(sym >= -1.0);
        CHECK(sym <= 1.0);
        // Delta transitions I - beta k k^T with unit keys have eigenvalue
        // 1 - beta alongside 1.
        const double beta_unit = sigmoid(z);
        const double beta_sym = 2.0 * sigmoid(z);
        CHECK(1.0 - beta_unit >= 0.0);
        CHECK(1.0 - beta_unit <= 1.0);
        CHECK(1.0 - beta_sym >= -1.0);
        CHECK(1.0 - beta_sym <= 1.0);
    }
}

TEST_CASE("delta keys are unit norm and beta 0 freezes the state") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Delta, EigenRange::Symmetric), 3);
    Rng rng(31);
    randomize_params(m, rng, 0.6);
    // Force beta to ~0: transitions become the identity and S stays at S_0=0,
    // so the readout sees a zero feature and logits collapse to the bias.
    // Row 0 of the embedding is fixed so the beta preactivation is -50 for
    // every token.
    auto emb = m.params.value(m.emb);
    for (int tok = 0; tok < 3; ++tok) emb(0, tok) = -1.0;
    auto w_beta = m.params.value(m.params.find("layer0.w_beta"));
    w_beta.setZero();
    w_beta(0, 0) = 50.0;
    ++m.params.version;
    const auto readout_b = m.params.value(m.params.find("readout_b"));
    ForwardResult fr = forward(m, {{0, 1, 2, 2, 1, 0}, {2, 0}});
    for (const Eigen::MatrixXd& lg : fr.logits) {
        for (int t = 0; t < lg.cols(); ++t) {
            for (int i = 0; i < lg.rows(); ++i) {
                CHECK(lg(i, t) == doctest::Approx(readout_b(i, 0)).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("handcrafted diagonal weights implement parity exactly") {
    TrainableSpec spec = tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric, 1, 4, 2, 2);
    TrainableModel m = TrainableModel::build(spec, 5);
    // Channel 0 holds the parity bit: token 0 keeps a ~ +1, token 1 flips the
    // state with a ~ -1 and b = 1, exactly the compiled parity recurrence.
    auto emb = m.params.value(m.emb);
    emb.setZero();
    emb(0, 0) = 1.0;
    emb(1, 1) = 1.0;
    auto w_a = m.params.value(m.params.find("layer0.w_a"));
    w_a.setZero();
    w_a(0, 0) = 20.0;
    w_a(0, 1) = -20.0;
    auto w_b = m.params.value(m.params.find("layer0.w_b"));
    w_b.setZero();
    w_b(0, 1) = 1.0;
    auto readout_w = m.params.value(m.readout_w);
    readout_w.setZero();
    readout_w(1, 0) = 10.0;
    auto readout_b = m.params.value(m.readout_b);
    readout_b(0, 0) = 1.0;
    ++m.params.version;

    TaskSpec task;
    task.kind = TaskSpec::Kind::Parity;
    const auto res = eval_length_gen(predictor_from_trainable(m), task, {40, 1000}, 100, 17);
    REQUIRE(res.size() == 2);
    for (const LengthGenResult& r : res) {
        CHECK(r.accuracy >= 0.999);
        CHECK(r.scaled >= 0.998);
    }
}

TEST_CASE("all-zero upstream gradient produces all-zero parameter gradients") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Delta, EigenRange::Symmetric), 7);
    Rng rng(41);
    randomize_params(m, rng, 0.5);
    ForwardResult fr = forward(m, {{0, 1, 2}});
    m.params.zero_grads();
    backward(m, *fr.cache, {Eigen::MatrixXd::Zero(3, 3)});
    for (double g : m.params.grads) CHECK(g == 0.0);
}

TEST_CASE("single-step gradient matches the closed form") {
    TrainableModel m =
        TrainableModel::build(tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric), 11);
    Rng rng(43);
    randomize_params(m, rng, 0.5);
    Sample s;
    s.tokens = {1};
    s.labels = {2};
    s.mask = {1};
    m.params.zero_grads();
    masked_cross_entropy(m, {s}, true);

    // Recompute the T=1 forward by hand: h = w_b x, feat = gain (*) h / rms.
    const Eigen::VectorXd x = m.params.value(m.emb).col(1);
    const Eigen::VectorXd h = m.params.value(m.params.find("layer0.w_b")) * x;
    const Eigen::VectorXd gain = m.params.value(m.rms_gain).col(0);
    const double r = std::sqrt(h.squaredNorm() / 4.0 + 1e-8);
    const Eigen::VectorXd feat = gain.cwiseProduct(h) / r;
    const Eigen::VectorXd logits =
        m.params.value(m.readout_w) * feat + m.params.value(m.readout_b).col(0);
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    Eigen::VectorXd dl = p;
    dl(2) -= 1.0;

    const Eigen::MatrixXd g_b = m.params.grad(m.readout_b);
    const Eigen::MatrixXd g_w = m.params.grad(m.readout_w);
    CHECK((g_b.col(0) - dl).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((g_w - dl * feat.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gradient check across layer kinds and ranges") {
    Rng data_rng(47);
    int combo = 0;
    for (LayerKind kind : {LayerKind::Diagonal, LayerKind::Delta, LayerKind::FullMatrix}) {
        for (EigenRange range : {EigenRange::UnitInterval, EigenRange::Symmetric}) {
            for (int rep = 0; rep < 3; ++rep) {
                const int layers = kind == LayerKind::FullMatrix ? 1 : 1 + rep % 2;
                TrainableModel m = TrainableModel::build(tiny_spec(kind, range, layers), 100 + combo);
                Rng rng(200 + combo);
                randomize_params(m, rng, 0.5);
                const auto batch = random_batch(data_rng, 2, 6, 3, 3);
                const GradCheckReport rep_out = grad_check(m, batch, 1e-4, 4000, 300 + combo);
                CHECK(rep_out.max_rel_err <= 1e-4);
                CHECK(rep_out.params_checked == m.params.size());
                ++combo;
            }
        }
    }
}

TEST_CASE("stale cache and shape mismatches are rejected") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric), 3);
    ForwardResult fr = forward(m, {{0, 1}});
    AdamW opt(m.params.size());
    m.params.zero_grads();
    opt.step(m.params, 1e-3, 0.0, 1.0);
    CHECK_THROWS_AS(backward(m, *fr.cache, {Eigen::MatrixXd::Zero(3, 2)}), ContractError);

    ForwardResult fr2 = forward(m, {{0, 1}});
    CHECK_THROWS_AS(backward(m, *fr2.cache, {}), ContractError);
    CHECK_THROWS_AS(backward(m, *fr2.cache, {Eigen::MatrixXd::Zero(2, 2)}), ContractError);
}

TEST_CASE("adamw respects lr zero, clipping, and schedules") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric), 3);
    Rng rng(51);
    randomize_params(m, rng, 0.5);
    const std::vector<double> before = m.params.values;
    AdamW opt(m.params.size());
    for (size_t i = 0; i < m.params.grads.size(); ++i) m.params.grads[i] = 1e6;
    opt.step(m.params, 0.0, 0.1, 1.0);
    CHECK(m.params.values == before);  // lr 0 freezes parameters

    // Clipped first step moves each coordinate by at most ~lr.
    opt.step(m.params, 1e-2, 0.0, 1.0);
    for (size_t i = 0; i < before.size(); ++i) {
        CHECK(std::abs(m.params.values[i] - before[i]) <= 1.1e-2);
    }

    TrainConfig cfg;
    cfg.lr = 1.0;
    cfg.steps = 100;
    cfg.warmup = 10;
    cfg.schedule = TrainConfig::Schedule::CosineWarmup;
    CHECK(schedule_lr(cfg, 0) == doctest::Approx(0.1));
    CHECK(schedule_lr(cfg, 9) == doctest::Approx(1.0));
    CHECK(schedule_lr(cfg, 10) == doctest::Approx(1.0));
    CHECK(schedule_lr(cfg, 99) < 0.01);
    cfg.schedule = TrainConfig::Schedule::Constant;
    CHECK(schedule_lr(cfg, 0) == 1.0);
    CHECK(schedule_lr(cfg, 99) == 1.0);
}

TEST_CASE("task spec plumbing") {
    TaskSpec parity;
    parity.kind = TaskSpec::Kind::Parity;
    CHECK(parity.vocab_size() == 2);
    CHECK(parity.label_count() == 2);
    CHECK(parity.random_accuracy() == 0.5);
    CHECK_FALSE(parity.sequence_metric());

    TaskSpec arith;
    arith.kind = TaskSpec::Kind::ModArith;
    arith.modulus = 5;
    arith.brackets = true;
    CHECK(arith.vocab_size() == 12);
    CHECK(arith.label_count() == 5);
    CHECK(arith.random_accuracy() == doctest::Approx(0.2));

    TaskSpec group;
    group.kind = TaskSpec::Kind::GroupWord;
    group.group = GroupSpec::symmetric(5);
    group.variant = VariantSpec::swaps_only();
    CHECK(group.vocab_size() == 11);
    CHECK(group.label_count() == 120);
    CHECK(group.sequence_metric());

    auto a = group.make(5, 16, 16, 99);
    auto b = group.make(5, 16, 16, 99);
    REQUIRE(a.size() == 5);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].tokens == b[i].tokens);
}

TEST_CASE("evaluation against random and compiled models") {
    TaskSpec parity;
    parity.kind = TaskSpec::Kind::Parity;

    // An untrained model with random head predicts near chance: scaled ~ 0.
    TrainableModel rand_model =
        TrainableModel::build(tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric, 1, 8, 2, 2), 3);
    Rng rng(61);
    randomize_params(rand_model, rng, 0.4);
    const auto near_zero =
        eval_length_gen(predictor_from_trainable(rand_model), parity, {40}, 10000, 62);
    CHECK(std::abs(near_zero[0].scaled) <= 0.05);

    // The compiled parity model is exact at any length.
    const LrnnModel compiled = compile_parity();
    const auto perfect =
        eval_length_gen(predictor_from_lrnn(compiled), parity, {40, 256}, 300, 63);
    for (const LengthGenResult& r : perfect) {
        CHECK(r.accuracy == 1.0);
        CHECK(r.scaled == 1.0);
    }

    // Compiled S5 with the full generator alphabet: sequence accuracy 1.
    TaskSpec s5;
    s5.kind = TaskSpec::Kind::GroupWord;
    s5.group = GroupSpec::symmetric(5);
    s5.variant = VariantSpec::full();
    const auto gens = group_generator_set(s5.group, s5.variant);
    const LrnnModel s5_model = compile_permutation_group(5, gens);
    const auto seq = eval_length_gen(predictor_from_lrnn(s5_model), s5, {500}, 50, 64);
    CHECK(seq[0].accuracy == 1.0);

    CHECK_THROWS_AS(eval_length_gen(predictor_from_lrnn(compiled), parity, {}, 10, 1),
                    ContractError);
    CHECK_THROWS_AS(eval_length_gen(predictor_from_lrnn(compiled), parity, {4}, 0, 1),
                    ContractError);
}

TEST_CASE("short parity training reduces the loss deterministically") {
    TrainableSpec spec = tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric, 1, 16, 2, 2);
    TaskSpec task;
    task.kind = TaskSpec::Kind::Parity;
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.batch_size = 16;
    cfg.steps = 150;
    cfg.schedule = TrainConfig::Schedule::Constant;
    cfg.seed = 7;
    cfg.len_min = 2;
    cfg.len_max = 12;
    cfg.eval_lengths = {12};
    cfg.eval_samples = 50;
    cfg.eval_interval = 50;

    TrainableModel m1 = TrainableModel::build(spec, 1);
    const TrainResult r1 = train_loop(m1, task, cfg);
    TrainableModel m2 = TrainableModel::build(spec, 1);
    const TrainResult r2 = train_loop(m2, task, cfg);

    CHECK(r1.final_loss < r1.initial_loss);
    CHECK(r1.final_loss == r2.final_loss);  // bitwise deterministic
    CHECK(m1.params.values == m2.params.values);
    REQUIRE(r1.history.size() == 3);
    CHECK(r1.history.back().step == 150);
    REQUIRE(r1.history[0].eval.size() == 1);
    CHECK(r1.history[0].eval[0].length == 12);

    const std::string csv = metrics_to_csv(r1.history);
    CHECK(csv.find("step,lr,loss,scaled_len12\n") == 0);
    CHECK(csv == metrics_to_csv(r2.history));
}

TEST_CASE("divergence is reported") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Diagonal, EigenRange::Symmetric, 1, 8, 2, 2), 3);
    m.params.value(m.readout_b)(0, 0) = std::numeric_limits<double>::quiet_NaN();
    ++m.params.version;
    TaskSpec task;
    task.kind = TaskSpec::Kind::Parity;
    TrainConfig cfg;
    cfg.steps = 3;
    cfg.batch_size = 4;
    cfg.len_min = 2;
    cfg.len_max = 4;
    CHECK_THROWS_AS(train_loop(m, task, cfg), TrainingDiverged);
}

TEST_CASE("model and config json round trips") {
    TrainableModel m = TrainableModel::build(tiny_spec(LayerKind::Delta, EigenRange::UnitInterval, 2, 5), 77);
    Rng rng(78);
    randomize_params(m, rng, 0.3);
    const std::string text = m.to_json_text();
    TrainableModel back = TrainableModel::from_json_text(text);
    CHECK(back.params.values == m.params.values);  // bit-exact double round trip
    CHECK(back.spec.layers.size() == 2);
    CHECK(back.spec.layers[0].kind == LayerKind::Delta);
    CHECK(back.spec.layers[0].range == EigenRange::UnitInterval);
    const ForwardResult fa = forward(m, {{0, 1, 2, 1}});
    const ForwardResult fb = forward(back, {{0, 1, 2, 1}});
    CHECK((fa.logits[0] - fb.logits[0]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK_THROWS_AS(TrainableModel::from_json_text("{}"), ContractError);
    CHECK_THROWS_AS(TrainableModel::from_json_text("no"), ContractError);

    TrainConfig cfg;
    cfg.lr = 0.5;
    cfg.eval_lengths = {40, 64};
    cfg.schedule = TrainConfig::Schedule::Constant;
    TrainConfig cfg_back = TrainConfig::from_json_text(cfg.to_json_text());
    CHECK(cfg_back.lr == 0.5);
    CHECK(cfg_back.eval_lengths == std::vector<int>{40, 64});
    CHECK(cfg_back.schedule == TrainConfig::Schedule::Constant);
    CHECK_THROWS_AS(TrainConfig::from_json_text("{\"schedule\":\"bogus\"}"), ContractError);
    CHECK_THROWS_AS(TrainConfig::from_json_text("{\"batch_size\":0}"), ContractError);
}

TEST_CASE("full matrix model learns short two-token products") {
    // Tokens act as 2x2 matrices on a flattened state; a short training run
    // should beat the initial loss comfortably.
    TrainableSpec spec = tiny_spec(LayerKind::FullMatrix, EigenRange::Symmetric, 1, 4, 2, 2);
    TrainableModel m = TrainableModel::build(spec, 19);
    TaskSpec task;
    task.kind = TaskSpec::Kind::Parity;
    TrainConfig cfg;
    cfg.lr = 5e-3;
    cfg.batch_size = 16;
    cfg.steps = 500;
    cfg.schedule = TrainConfig::Schedule::Constant;
    cfg.len_min = 2;
    cfg.len_max = 8;
    const TrainResult r = train_loop(m, task, cfg);
    CHECK(r.final_loss < r.initial_loss);
}
