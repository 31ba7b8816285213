#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "statetrack/common.hpp"
#include "statetrack/lrnn.hpp"
#include "statetrack/rng.hpp"
#include "statetrack/tasks.hpp"

namespace statetrack {

// Thrown by train_loop when the loss stops being finite. Divergence is a
// result, not a bug, so it gets its own type instead of ContractError.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LayerKind { Diagonal, Delta, FullMatrix };
enum class EigenRange { UnitInterval, Symmetric };

struct LayerSpec {
    LayerKind kind = LayerKind::Diagonal;
    EigenRange range = EigenRange::Symmetric;
};

struct TrainableSpec {
    int vocab = 2;
    int n_out = 2;
    // Hidden width; doubles as the state dimension n of a FullMatrix layer.
    int d_model = 64;
    std::vector<LayerSpec> layers;

    void validate() const;
};

// All parameters live in one flat buffer with named matrix segments viewed
// through Eigen maps, so the optimizer, serialization and finite-difference
// probing all treat the model as a single vector.
class ParamStore {
 public:
    int add(const std::string& name, int rows, int cols);
    int find(const std::string& name) const;  // -1 when absent

    Eigen::Map<Eigen::MatrixXd> value(int id);
    Eigen::Map<const Eigen::MatrixXd> value(int id) const;
    Eigen::Map<Eigen::MatrixXd> grad(int id);

    void zero_grads();
    size_t size() const { return values.size(); }

    struct Seg {
        std::string name;
        size_t offset = 0;
        int rows = 0, cols = 0;
    };
    std::vector<Seg> segs;
    std::vector<double> values;
    std::vector<double> grads;
    // Bumped whenever parameter values change; forward caches record it so
    // backward can reject a cache taken before an update.
    uint64_t version = 0;
};

// Sequence model with learned token embeddings, a stack of recurrent layers
// and a linear readout over an RMS-normalized last-layer output.
//
// Layer kinds:
//   Diagonal    h_t = a_t (*) h_{t-1} + W_b x_t, elementwise a_t = act(W_a x_t)
//               with act = sigmoid (unit_interval) or 2 sigmoid - 1 (symmetric),
//               so transition eigenvalues stay in [0,1] resp. [-1,1].
//   Delta       matrix state S_t = (I - beta_t k_t k_t^T) S_{t-1}
//               + beta_t k_t v_t^T with unit-norm keys, beta = sigmoid (unit
//               interval, eigenvalues [0,1]) or 2 sigmoid (symmetric,
//               eigenvalues (-1,1]); output S_t^T q_t.
//   FullMatrix  matrix state H_t = A(x_t) H_{t-1} from H_0 = I with one
//               unconstrained learned matrix per token; the flattened state is
//               projected onto the unit ball and fed straight to the readout.
//               Must be the only layer: it consumes raw tokens.
class TrainableModel {
 public:
    TrainableSpec spec;
    ParamStore params;

    struct LayerSegs {
        int w_a = -1, w_b = -1;                  // Diagonal
        int w_k = -1, w_v = -1, w_q = -1, w_beta = -1;  // Delta
        std::vector<int> a_mats;                 // FullMatrix, one per token
    };
    int emb = -1, rms_gain = -1, readout_w = -1, readout_b = -1;
    std::vector<LayerSegs> segs;

    // Random projection weights, ones gain, zero readout; deterministic in
    // the seed.
    static TrainableModel build(const TrainableSpec& spec, uint64_t seed);

    int feature_dim() const;  // readout input width
    bool uses_tokens_directly() const;  // FullMatrix models skip the embedding

    std::string to_json_text() const;
    static TrainableModel from_json_text(const std::string& text);
};

// Overwrites every parameter with N(0, scale^2) draws; used by gradient
// checks that want fully generic weights (the default build zeroes the
// readout).
void randomize_params(TrainableModel& model, Rng& rng, double scale);

struct ForwardCache;  // definition in train.cpp; opaque to callers

struct ForwardResult {
    // One n_out x T matrix of per-position logits per input sequence.
    std::vector<Eigen::MatrixXd> logits;
    std::shared_ptr<ForwardCache> cache;
};

ForwardResult forward(const TrainableModel& model, const std::vector<std::vector<int>>& tokens);

// Accumulates parameter gradients into model.params.grads given
// dLoss/dlogits for each sequence. The cache must come from a forward pass
// on the current parameter values.
void backward(TrainableModel& model, const ForwardCache& cache,
              const std::vector<Eigen::MatrixXd>& dlogits);

// Mean cross-entropy over masked positions of the batch; optionally runs
// backward and accumulates gradients (without zeroing them first).
double masked_cross_entropy(TrainableModel& model, const std::vector<Sample>& batch,
                            bool accumulate_grads);

// Which generator feeds training and evaluation, plus the task's chance
// accuracy and metric convention (group tasks score whole sequences).
struct TaskSpec {
    enum class Kind { Parity, ModArith, GroupWord };
    Kind kind = Kind::Parity;
    int modulus = 5;          // ModArith
    bool brackets = false;    // ModArith
    GroupSpec group = GroupSpec::cyclic(2);  // GroupWord
    VariantSpec variant = VariantSpec::full();

    int vocab_size() const;
    int label_count() const;
    double random_accuracy() const;
    bool sequence_metric() const { return kind == Kind::GroupWord; }
    std::vector<Sample> make(int count, int len_min, int len_max, uint64_t seed) const;
};

// Defaults are desk-scale: a few minutes to tens of minutes on one CPU core
// depending on the layer kind and sequence lengths. Benchmark harnesses
// typically override batch_size/steps downward and enable early stopping.
struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 256;
    long long steps = 20000;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    enum class Schedule { Constant, CosineWarmup };
    Schedule schedule = Schedule::CosineWarmup;
    long long warmup = 200;
    uint64_t seed = 1;
    int len_min = 3, len_max = 40;
    std::vector<int> eval_lengths;
    int eval_samples = 200;
    long long eval_interval = 1000;
    // When > 0, training stops at the first eval whose mean scaled accuracy
    // over eval_lengths reaches this value. 0 disables early stopping.
    double early_stop_scaled = 0.0;

    void validate() const;
    std::string to_json_text() const;
    static TrainConfig from_json_text(const std::string& text);
};

// Adam with decoupled weight decay and global-norm gradient clipping.
class AdamW {
 public:
    explicit AdamW(size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    // Clips grads in place, then applies one update to store.values.
    void step(ParamStore& store, double lr, double weight_decay, double clip_norm);

 private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<double> m_, v_;
};

// Learning rate at a 0-based step under the config's schedule.
double schedule_lr(const TrainConfig& cfg, long long step);

struct LengthGenResult {
    int length = 0;
    double accuracy = 0;  // raw masked accuracy (sequence accuracy for groups)
    double scaled = 0;    // (acc - chance) / (1 - chance); == accuracy for groups
};

struct MetricPoint {
    long long step = 0;
    double lr = 0;
    double loss = 0;
    std::vector<LengthGenResult> eval;
};

struct TrainResult {
    std::vector<MetricPoint> history;
    double initial_loss = 0;
    double final_loss = 0;
};

// Maps a token sequence to predicted labels, one per position.
using Predictor = std::function<std::vector<int>(const std::vector<int>&)>;

// Greedy argmax over the model's logits. Borrows the model; keep it alive.
Predictor predictor_from_trainable(const TrainableModel& model);
// Exact-arithmetic compiled models predict through their decoders.
Predictor predictor_from_lrnn(const LrnnModel& model);

// Accuracy over freshly generated samples at each length; per-position
// accuracy rescaled against chance for token-level tasks, all-masked-correct
// sequence accuracy for group word problems.
std::vector<LengthGenResult> eval_length_gen(const Predictor& predict, const TaskSpec& task,
                                             const std::vector<int>& lengths,
                                             int samples_per_length, uint64_t seed);

// SGD loop: fresh batch per step, AdamW update, periodic eval on
// cfg.eval_lengths. Deterministic given cfg.seed (single-threaded). Throws
// TrainingDiverged when the loss leaves the finite range.
TrainResult train_loop(TrainableModel& model, const TaskSpec& task, const TrainConfig& cfg);

// "step,loss,lr,scaled_acc_len<L>,..." rows, one per recorded metric point.
std::string metrics_to_csv(const std::vector<MetricPoint>& history);

struct GradCheckReport {
    double max_rel_err = 0;
    size_t params_checked = 0;
};

// Central finite differences on up to max_probes randomly chosen parameters
// against the analytic gradient of the masked cross-entropy. Relative error
// uses max(|analytic|, |numeric|, 1e-3) in the denominator.
GradCheckReport grad_check(TrainableModel& model, const std::vector<Sample>& batch, double fd_eps,
                           int max_probes, uint64_t seed);

}  // namespace statetrack
