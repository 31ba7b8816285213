#include "statetrack/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace statetrack {

namespace {

constexpr double kKeyEps = 1e-8;  // inside the key L2 norm, avoids 0-division
constexpr double kRmsEps = 1e-8;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

uint64_t mix_seed(uint64_t seed, uint64_t salt, uint64_t index) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1)) ^ (0xbf58476d1ce4e5b9ULL * (index + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter storage

int ParamStore::add(const std::string& name, int rows, int cols) {
    require(rows >= 1 && cols >= 1, "ParamStore: segment dimensions must be positive");
    require(find(name) < 0, "ParamStore: duplicate segment " + name);
    Seg seg;
    seg.name = name;
    seg.offset = values.size();
    seg.rows = rows;
    seg.cols = cols;
    segs.push_back(seg);
    values.resize(values.size() + static_cast<size_t>(rows) * cols, 0.0);
    grads.resize(values.size(), 0.0);
    return static_cast<int>(segs.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
    for (size_t i = 0; i < segs.size(); ++i) {
        if (segs[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Eigen::Map<Eigen::MatrixXd> ParamStore::value(int id) {
    const Seg& s = segs.at(static_cast<size_t>(id));
    return {values.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::value(int id) const {
    const Seg& s = segs.at(static_cast<size_t>(id));
    return {values.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::grad(int id) {
    const Seg& s = segs.at(static_cast<size_t>(id));
    return {grads.data() + s.offset, s.rows, s.cols};
}

void ParamStore::zero_grads() { std::fill(grads.begin(), grads.end(), 0.0); }

// ---------------------------------------------------------------------------
// Model construction

void TrainableSpec::validate() const {
    require(vocab >= 2, "TrainableSpec: vocabulary must have at least 2 tokens");
    require(n_out >= 2, "TrainableSpec: output vocabulary must have at least 2 labels");
    require(d_model >= 1, "TrainableSpec: d_model must be positive");
    require(!layers.empty(), "TrainableSpec: at least one layer");
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerKind::FullMatrix) {
            require(layers.size() == 1,
                    "TrainableSpec: a FullMatrix layer consumes raw tokens and must be the only "
                    "layer");
        }
    }
}

bool TrainableModel::uses_tokens_directly() const {
    return spec.layers.size() == 1 && spec.layers[0].kind == LayerKind::FullMatrix;
}

int TrainableModel::feature_dim() const {
    return uses_tokens_directly() ? spec.d_model * spec.d_model : spec.d_model;
}

TrainableModel TrainableModel::build(const TrainableSpec& spec, uint64_t seed) {
    spec.validate();
    TrainableModel m;
    m.spec = spec;
    Rng rng(seed);
    const int d = spec.d_model;

    auto fill_normal = [&](int id, double scale) {
        auto v = m.params.value(id);
        for (int c = 0; c < v.cols(); ++c) {
            for (int r = 0; r < v.rows(); ++r) v(r, c) = scale * rng.normal();
        }
    };

    if (!m.uses_tokens_directly()) {
        m.emb = m.params.add("embedding", d, spec.vocab);
        fill_normal(m.emb, 1.0);
    }
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        const std::string p = "layer" + std::to_string(li) + ".";
        LayerSegs segs;
        switch (spec.layers[li].kind) {
            case LayerKind::Diagonal:
                segs.w_a = m.params.add(p + "w_a", d, d);
                segs.w_b = m.params.add(p + "w_b", d, d);
                fill_normal(segs.w_a, proj_scale);
                fill_normal(segs.w_b, proj_scale);
                break;
            case LayerKind::Delta:
                segs.w_k = m.params.add(p + "w_k", d, d);
                segs.w_v = m.params.add(p + "w_v", d, d);
                segs.w_q = m.params.add(p + "w_q", d, d);
                segs.w_beta = m.params.add(p + "w_beta", 1, d);
                fill_normal(segs.w_k, proj_scale);
                fill_normal(segs.w_v, proj_scale);
                fill_normal(segs.w_q, proj_scale);
                fill_normal(segs.w_beta, proj_scale);
                break;
            case LayerKind::FullMatrix:
                for (int tok = 0; tok < spec.vocab; ++tok) {
                    const int id = m.params.add(p + "a" + std::to_string(tok), d, d);
                    fill_normal(id, 0.02);
                    auto v = m.params.value(id);
                    // Near-identity start keeps long products bounded early on.
                    for (int i = 0; i < d; ++i) v(i, i) += 1.0;
                    segs.a_mats.push_back(id);
                }
                break;
        }
        m.segs.push_back(std::move(segs));
    }
    if (!m.uses_tokens_directly()) {
        m.rms_gain = m.params.add("rms_gain", d, 1);
        m.params.value(m.rms_gain).setOnes();
    }
    m.readout_w = m.params.add("readout_w", spec.n_out, m.feature_dim());
    m.readout_b = m.params.add("readout_b", spec.n_out, 1);
    // Zero readout: initial logits are uniform regardless of the rest.
    return m;
}

void randomize_params(TrainableModel& model, Rng& rng, double scale) {
    for (double& x : model.params.values) x = scale * rng.normal();
    // FullMatrix transitions re-center at the identity so random products do
    // not explode over the sequence.
    if (model.uses_tokens_directly()) {
        for (int id : model.segs[0].a_mats) {
            auto v = model.params.value(id);
            for (int i = 0; i < v.rows(); ++i) v(i, i) += 1.0;
        }
    }
    ++model.params.version;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerCache {
    Eigen::MatrixXd in;  // d x T layer input (unused by FullMatrix)
    // Diagonal
    Eigen::MatrixXd za, a, h;
    // Delta
    Eigen::MatrixXd ktilde, k, v, q, u;
    Eigen::VectorXd zbeta, beta, knorm2;
    // T+1 d x d states stored side by side in one buffer (d x d*(T+1)) to
    // keep per-sequence allocation count flat.
    Eigen::MatrixXd S;
    auto state(int t) { return S.middleCols(static_cast<Eigen::Index>(t) * S.rows(), S.rows()); }
    auto state(int t) const {
        return S.middleCols(static_cast<Eigen::Index>(t) * S.rows(), S.rows());
    }
    // FullMatrix
    std::vector<Eigen::MatrixXd> H;  // T+1 states
};

struct SeqCache {
    std::vector<int> tokens;
    std::vector<LayerCache> layers;
    Eigen::MatrixXd feat_in;   // readout feature before normalization
    Eigen::MatrixXd feat;      // after RMS norm / ball projection
    Eigen::VectorXd scale;     // rms value r_t, or raw feature norm
};

struct ForwardCache {
    uint64_t version = 0;
    std::vector<SeqCache> seqs;
};

namespace {

void forward_diagonal(const TrainableModel& m, const TrainableModel::LayerSegs& segs,
                      EigenRange range, LayerCache& lc) {
    const auto w_a = m.params.value(segs.w_a);
    const auto w_b = m.params.value(segs.w_b);
    const int d = static_cast<int>(lc.in.rows());
    const int T = static_cast<int>(lc.in.cols());
    lc.za = w_a * lc.in;
    lc.a.resize(d, T);
    lc.h.resize(d, T);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(d);
    const Eigen::MatrixXd b = w_b * lc.in;
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < d; ++i) {
            const double s = sigmoid(lc.za(i, t));
            lc.a(i, t) = range == EigenRange::UnitInterval ? s : 2.0 * s - 1.0;
        }
        h = lc.a.col(t).cwiseProduct(h) + b.col(t);
        lc.h.col(t) = h;
    }
}

void forward_delta(const TrainableModel& m, const TrainableModel::LayerSegs& segs,
                   EigenRange range, LayerCache& lc, Eigen::MatrixXd& out) {
    const auto w_k = m.params.value(segs.w_k);
    const auto w_v = m.params.value(segs.w_v);
    const auto w_q = m.params.value(segs.w_q);
    const auto w_beta = m.params.value(segs.w_beta);
    const int d = static_cast<int>(lc.in.rows());
    const int T = static_cast<int>(lc.in.cols());
    lc.ktilde = w_k * lc.in;
    lc.v = w_v * lc.in;
    lc.q = w_q * lc.in;
    lc.k.resize(d, T);
    lc.u.resize(d, T);
    lc.zbeta.resize(T);
    lc.beta.resize(T);
    lc.knorm2.resize(T);
    lc.S.resize(d, static_cast<Eigen::Index>(d) * (T + 1));
    lc.state(0).setZero();
    out.resize(d, T);
    for (int t = 0; t < T; ++t) {
        lc.knorm2(t) = lc.ktilde.col(t).squaredNorm() + kKeyEps;
        lc.k.col(t) = lc.ktilde.col(t) / std::sqrt(lc.knorm2(t));
        lc.zbeta(t) = (w_beta * lc.in.col(t))(0, 0);
        const double s = sigmoid(lc.zbeta(t));
        lc.beta(t) = range == EigenRange::UnitInterval ? s : 2.0 * s;
        const auto S_prev = lc.state(t);
        auto S_next = lc.state(t + 1);
        lc.u.col(t) = lc.v.col(t);
        lc.u.col(t).noalias() -= S_prev.transpose() * lc.k.col(t);
        S_next = S_prev;
        S_next.noalias() += lc.beta(t) * lc.k.col(t) * lc.u.col(t).transpose();
        out.col(t).noalias() = S_next.transpose() * lc.q.col(t);
    }
}

void forward_full(const TrainableModel& m, const TrainableModel::LayerSegs& segs,
                  const std::vector<int>& tokens, LayerCache& lc, Eigen::MatrixXd& out) {
    const int n = m.spec.d_model;
    const int T = static_cast<int>(tokens.size());
    lc.H.assign(static_cast<size_t>(T) + 1, Eigen::MatrixXd::Identity(n, n));
    out.resize(n * n, T);
    for (int t = 0; t < T; ++t) {
        const auto a = m.params.value(segs.a_mats[static_cast<size_t>(tokens[t])]);
        lc.H[static_cast<size_t>(t) + 1] = a * lc.H[static_cast<size_t>(t)];
        out.col(t) =
            Eigen::Map<const Eigen::VectorXd>(lc.H[static_cast<size_t>(t) + 1].data(), n * n);
    }
}

}  // namespace

ForwardResult forward(const TrainableModel& model, const std::vector<std::vector<int>>& tokens) {
    model.spec.validate();
    ForwardResult res;
    res.cache = std::make_shared<ForwardCache>();
    res.cache->version = model.params.version;
    const auto readout_w = model.params.value(model.readout_w);
    const auto readout_b = model.params.value(model.readout_b);

    for (const std::vector<int>& seq : tokens) {
        require(!seq.empty(), "forward: empty token sequence");
        for (int tok : seq) {
            require(tok >= 0 && tok < model.spec.vocab, "forward: token out of vocabulary");
        }
        const int T = static_cast<int>(seq.size());
        SeqCache sc;
        sc.tokens = seq;
        sc.layers.resize(model.spec.layers.size());

        Eigen::MatrixXd cur;
        if (model.uses_tokens_directly()) {
            forward_full(model, model.segs[0], seq, sc.layers[0], cur);
        } else {
            const auto emb = model.params.value(model.emb);
            cur.resize(model.spec.d_model, T);
            for (int t = 0; t < T; ++t) cur.col(t) = emb.col(seq[static_cast<size_t>(t)]);
            for (size_t li = 0; li < model.spec.layers.size(); ++li) {
                LayerCache& lc = sc.layers[li];
                lc.in = cur;
                switch (model.spec.layers[li].kind) {
                    case LayerKind::Diagonal:
                        forward_diagonal(model, model.segs[li], model.spec.layers[li].range, lc);
                        cur = lc.h;
                        break;
                    case LayerKind::Delta:
                        forward_delta(model, model.segs[li], model.spec.layers[li].range, lc, cur);
                        break;
                    case LayerKind::FullMatrix:
                        throw ContractError("forward: FullMatrix must be the only layer");
                }
            }
        }

        sc.feat_in = cur;
        sc.feat.resize(cur.rows(), T);
        sc.scale.resize(T);
        if (model.uses_tokens_directly()) {
            // Unit-ball projection stabilizes unconstrained matrix products.
            for (int t = 0; t < T; ++t) {
                const double norm = cur.col(t).norm();
                sc.scale(t) = norm;
                sc.feat.col(t) = norm > 1.0 ? Eigen::VectorXd(cur.col(t) / norm)
                                            : Eigen::VectorXd(cur.col(t));
            }
        } else {
            const auto gain = model.params.value(model.rms_gain);
            const double d = static_cast<double>(cur.rows());
            for (int t = 0; t < T; ++t) {
                const double r = std::sqrt(cur.col(t).squaredNorm() / d + kRmsEps);
                sc.scale(t) = r;
                sc.feat.col(t) = gain.col(0).cwiseProduct(cur.col(t)) / r;
            }
        }
        res.logits.push_back((readout_w * sc.feat).colwise() + readout_b.col(0));
        res.cache->seqs.push_back(std::move(sc));
    }
    return res;
}

namespace {

void backward_diagonal(TrainableModel& m, const TrainableModel::LayerSegs& segs, EigenRange range,
                       const LayerCache& lc, const Eigen::MatrixXd& dout, Eigen::MatrixXd& din) {
    const auto w_a = m.params.value(segs.w_a);
    const auto w_b = m.params.value(segs.w_b);
    auto g_w_a = m.params.grad(segs.w_a);
    auto g_w_b = m.params.grad(segs.w_b);
    const int d = static_cast<int>(lc.in.rows());
    const int T = static_cast<int>(lc.in.cols());
    din = Eigen::MatrixXd::Zero(d, T);
    Eigen::MatrixXd dza(d, T), db(d, T);
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(d);
    for (int t = T - 1; t >= 0; --t) {
        dh += dout.col(t);
        const Eigen::VectorXd h_prev =
            t > 0 ? Eigen::VectorXd(lc.h.col(t - 1)) : Eigen::VectorXd(Eigen::VectorXd::Zero(d));
        Eigen::VectorXd da = dh.cwiseProduct(h_prev);
        for (int i = 0; i < d; ++i) {
            const double s = sigmoid(lc.za(i, t));
            const double dact = range == EigenRange::UnitInterval ? s * (1.0 - s)
                                                                  : 2.0 * s * (1.0 - s);
            dza(i, t) = da(i) * dact;
        }
        db.col(t) = dh;
        dh = dh.cwiseProduct(lc.a.col(t));
    }
    g_w_a += dza * lc.in.transpose();
    g_w_b += db * lc.in.transpose();
    din = w_a.transpose() * dza + w_b.transpose() * db;
}

void backward_delta(TrainableModel& m, const TrainableModel::LayerSegs& segs, EigenRange range,
                    const LayerCache& lc, const Eigen::MatrixXd& dout, Eigen::MatrixXd& din) {
    const auto w_k = m.params.value(segs.w_k);
    const auto w_v = m.params.value(segs.w_v);
    const auto w_q = m.params.value(segs.w_q);
    const auto w_beta = m.params.value(segs.w_beta);
    auto g_w_k = m.params.grad(segs.w_k);
    auto g_w_v = m.params.grad(segs.w_v);
    auto g_w_q = m.params.grad(segs.w_q);
    auto g_w_beta = m.params.grad(segs.w_beta);
    const int d = static_cast<int>(lc.in.rows());
    const int T = static_cast<int>(lc.in.cols());
    Eigen::MatrixXd dktilde(d, T), dv(d, T), dq(d, T);
    Eigen::VectorXd dzbeta(T);
    Eigen::MatrixXd dS = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd dSu(d), du(d), dk(d);
    for (int t = T - 1; t >= 0; --t) {
        const auto k = lc.k.col(t);
        const auto u = lc.u.col(t);
        const auto S_prev = lc.state(t);
        // Output y_t = S_t^T q_t.
        dS.noalias() += lc.q.col(t) * dout.col(t).transpose();
        dq.col(t).noalias() = lc.state(t + 1) * dout.col(t);
        // S_t = S_{t-1} + beta k u^T with u = v - S_{t-1}^T k.
        dSu.noalias() = dS * u;
        const double dbeta = k.dot(dSu);
        du.noalias() = lc.beta(t) * (dS.transpose() * k);
        dk = lc.beta(t) * dSu;
        dk.noalias() -= S_prev * du;
        dv.col(t) = du;
        dS.noalias() -= k * du.transpose();  // into dS_{t-1}; identity term already in dS
        // Key normalization k = ktilde / sqrt(|ktilde|^2 + eps).
        const double inv_n = 1.0 / std::sqrt(lc.knorm2(t));
        dktilde.col(t) =
            inv_n * dk - (inv_n * inv_n * inv_n) * lc.ktilde.col(t) * lc.ktilde.col(t).dot(dk);
        const double s = sigmoid(lc.zbeta(t));
        const double dact = range == EigenRange::UnitInterval ? s * (1.0 - s)
                                                              : 2.0 * s * (1.0 - s);
        dzbeta(t) = dbeta * dact;
    }
    g_w_k.noalias() += dktilde * lc.in.transpose();
    g_w_v.noalias() += dv * lc.in.transpose();
    g_w_q.noalias() += dq * lc.in.transpose();
    g_w_beta.noalias() += (lc.in * dzbeta).transpose();
    din = w_k.transpose() * dktilde;
    din.noalias() += w_v.transpose() * dv;
    din.noalias() += w_q.transpose() * dq;
    din.noalias() += w_beta.transpose() * dzbeta.transpose();
}

void backward_full(TrainableModel& m, const TrainableModel::LayerSegs& segs, const LayerCache& lc,
                   const std::vector<int>& tokens, const Eigen::MatrixXd& dout) {
    const int n = m.spec.d_model;
    const int T = static_cast<int>(tokens.size());
    Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(n, n);
    for (int t = T - 1; t >= 0; --t) {
        dH += Eigen::Map<const Eigen::MatrixXd>(dout.col(t).data(), n, n);
        const auto a = m.params.value(segs.a_mats[static_cast<size_t>(tokens[t])]);
        auto g_a = m.params.grad(segs.a_mats[static_cast<size_t>(tokens[t])]);
        g_a += dH * lc.H[static_cast<size_t>(t)].transpose();
        dH = (a.transpose() * dH).eval();
    }
}

}  // namespace

void backward(TrainableModel& model, const ForwardCache& cache,
              const std::vector<Eigen::MatrixXd>& dlogits) {
    require(cache.version == model.params.version,
            "backward: cache is stale, parameters changed since the forward pass");
    require(dlogits.size() == cache.seqs.size(),
            "backward: gradient count does not match cached sequences");
    const auto readout_w = model.params.value(model.readout_w);
    auto g_readout_w = model.params.grad(model.readout_w);
    auto g_readout_b = model.params.grad(model.readout_b);

    for (size_t si = 0; si < cache.seqs.size(); ++si) {
        const SeqCache& sc = cache.seqs[si];
        const Eigen::MatrixXd& dl = dlogits[si];
        const int T = static_cast<int>(sc.tokens.size());
        require(dl.rows() == model.spec.n_out && dl.cols() == T,
                "backward: dlogits shape mismatch");

        g_readout_w += dl * sc.feat.transpose();
        g_readout_b += dl.rowwise().sum();
        Eigen::MatrixXd dfeat = readout_w.transpose() * dl;

        Eigen::MatrixXd dcur(sc.feat_in.rows(), T);
        if (model.uses_tokens_directly()) {
            for (int t = 0; t < T; ++t) {
                const double norm = sc.scale(t);
                if (norm > 1.0) {
                    const Eigen::VectorXd p = sc.feat.col(t);
                    dcur.col(t) = (dfeat.col(t) - p * p.dot(dfeat.col(t))) / norm;
                } else {
                    dcur.col(t) = dfeat.col(t);
                }
            }
            backward_full(model, model.segs[0], sc.layers[0], sc.tokens, dcur);
            continue;
        }

        const auto gain = model.params.value(model.rms_gain);
        auto g_gain = model.params.grad(model.rms_gain);
        const double d = static_cast<double>(sc.feat_in.rows());
        for (int t = 0; t < T; ++t) {
            const double r = sc.scale(t);
            const Eigen::VectorXd y = sc.feat_in.col(t);
            const Eigen::VectorXd gd = gain.col(0).cwiseProduct(dfeat.col(t));
            g_gain += y.cwiseProduct(dfeat.col(t)) / r;
            dcur.col(t) = gd / r - y * (y.dot(gd) / (d * r * r * r));
        }

        for (int li = static_cast<int>(model.spec.layers.size()) - 1; li >= 0; --li) {
            Eigen::MatrixXd din;
            const auto& lc = sc.layers[static_cast<size_t>(li)];
            switch (model.spec.layers[static_cast<size_t>(li)].kind) {
                case LayerKind::Diagonal:
                    backward_diagonal(model, model.segs[static_cast<size_t>(li)],
                                      model.spec.layers[static_cast<size_t>(li)].range, lc, dcur,
                                      din);
                    break;
                case LayerKind::Delta:
                    backward_delta(model, model.segs[static_cast<size_t>(li)],
                                   model.spec.layers[static_cast<size_t>(li)].range, lc, dcur,
                                   din);
                    break;
                case LayerKind::FullMatrix:
                    throw ContractError("backward: FullMatrix must be the only layer");
            }
            dcur = std::move(din);
        }
        auto g_emb = model.params.grad(model.emb);
        for (int t = 0; t < T; ++t) {
            g_emb.col(sc.tokens[static_cast<size_t>(t)]) += dcur.col(t);
        }
    }
}

double masked_cross_entropy(TrainableModel& model, const std::vector<Sample>& batch,
                            bool accumulate_grads) {
    require(!batch.empty(), "masked_cross_entropy: empty batch");
    std::vector<std::vector<int>> tokens;
    long long masked_total = 0;
    for (const Sample& s : batch) {
        s.validate();
        tokens.push_back(s.tokens);
        for (size_t t = 0; t < s.mask.size(); ++t) {
            if (s.mask[t]) {
                require(s.labels[t] < model.spec.n_out,
                        "masked_cross_entropy: label outside output vocabulary");
                ++masked_total;
            }
        }
    }
    require(masked_total > 0, "masked_cross_entropy: no masked positions in batch");

    ForwardResult fr = forward(model, tokens);
    double loss = 0;
    std::vector<Eigen::MatrixXd> dlogits;
    for (size_t si = 0; si < batch.size(); ++si) {
        const Sample& s = batch[si];
        const Eigen::MatrixXd& lg = fr.logits[si];
        Eigen::MatrixXd dl = Eigen::MatrixXd::Zero(lg.rows(), lg.cols());
        for (int t = 0; t < lg.cols(); ++t) {
            if (!s.mask[static_cast<size_t>(t)]) continue;
            const int label = s.labels[static_cast<size_t>(t)];
            const Eigen::VectorXd col = lg.col(t);
            const double mx = col.maxCoeff();
            const Eigen::VectorXd ex = (col.array() - mx).exp();
            const double z = ex.sum();
            loss += -(col(label) - mx - std::log(z));
            if (accumulate_grads) {
                dl.col(t) = ex / z / static_cast<double>(masked_total);
                dl(label, t) -= 1.0 / static_cast<double>(masked_total);
            }
        }
        dlogits.push_back(std::move(dl));
    }
    if (accumulate_grads) backward(model, *fr.cache, dlogits);
    return loss / static_cast<double>(masked_total);
}

// ---------------------------------------------------------------------------
// Tasks and evaluation

int TaskSpec::vocab_size() const {
    switch (kind) {
        case Kind::Parity:
            return 2;
        case Kind::ModArith:
            return ModArithVocab{modulus, brackets}.size();
        case Kind::GroupWord:
            return group_token_alphabet(group, variant);
    }
    throw ContractError("TaskSpec: unreachable");
}

int TaskSpec::label_count() const {
    switch (kind) {
        case Kind::Parity:
            return 2;
        case Kind::ModArith:
            return modulus;
        case Kind::GroupWord: {
            const uint64_t order = group.order();
            require(order <= 2000000000ULL, "TaskSpec: group too large for label space");
            return static_cast<int>(order);
        }
    }
    throw ContractError("TaskSpec: unreachable");
}

double TaskSpec::random_accuracy() const {
    return 1.0 / static_cast<double>(label_count());
}

std::vector<Sample> TaskSpec::make(int count, int len_min, int len_max, uint64_t seed) const {
    switch (kind) {
        case Kind::Parity:
            return gen_parity(len_min, len_max, count, seed);
        case Kind::ModArith:
            return gen_mod_arith(modulus, brackets, len_min, len_max, count, seed);
        case Kind::GroupWord: {
            // The group generator emits fixed-length words; draw one length
            // per batch, deterministically from the seed.
            Rng rng(seed ^ 0x5851f42d4c957f2dULL);
            const int len = len_min + static_cast<int>(
                                          rng.below(static_cast<uint64_t>(len_max - len_min + 1)));
            return gen_group_word(group, variant, len, count, seed);
        }
    }
    throw ContractError("TaskSpec: unreachable");
}

Predictor predictor_from_trainable(const TrainableModel& model) {
    return [&model](const std::vector<int>& tokens) {
        ForwardResult fr = forward(model, {tokens});
        const Eigen::MatrixXd& lg = fr.logits[0];
        std::vector<int> labels;
        labels.reserve(static_cast<size_t>(lg.cols()));
        for (int t = 0; t < lg.cols(); ++t) {
            int best = 0;
            for (int i = 1; i < lg.rows(); ++i) {
                if (lg(i, t) > lg(best, t)) best = i;
            }
            labels.push_back(best);
        }
        return labels;
    };
}

Predictor predictor_from_lrnn(const LrnnModel& model) {
    return [&model](const std::vector<int>& tokens) { return model_run(model, tokens); };
}

std::vector<LengthGenResult> eval_length_gen(const Predictor& predict, const TaskSpec& task,
                                             const std::vector<int>& lengths,
                                             int samples_per_length, uint64_t seed) {
    require(!lengths.empty(), "eval_length_gen: empty length list");
    require(samples_per_length >= 1, "eval_length_gen: need at least one sample per length");
    std::vector<LengthGenResult> out;
    for (size_t i = 0; i < lengths.size(); ++i) {
        const int len = lengths[i];
        require(len >= 1, "eval_length_gen: lengths must be positive");
        const std::vector<Sample> samples =
            task.make(samples_per_length, len, len, mix_seed(seed, 0xEBA1, i));
        // Per-sample (correct, total) tallies land in private slots, so the
        // result is identical no matter how many workers run; the reduction
        // below is a fixed-order sum.
        std::vector<std::pair<double, double>> tally(samples.size(), {0.0, 0.0});
        auto score_one = [&](size_t si) {
            const Sample& s = samples[si];
            const std::vector<int> pred = predict(s.tokens);
            require(pred.size() == s.tokens.size(),
                    "eval_length_gen: predictor output length mismatch");
            if (task.sequence_metric()) {
                bool all = true;
                for (size_t t = 0; t < s.mask.size(); ++t) {
                    if (s.mask[t] && pred[t] != s.labels[t]) all = false;
                }
                tally[si] = {all ? 1.0 : 0.0, 1.0};
            } else {
                double c = 0, n = 0;
                for (size_t t = 0; t < s.mask.size(); ++t) {
                    if (!s.mask[t]) continue;
                    c += pred[t] == s.labels[t] ? 1.0 : 0.0;
                    n += 1.0;
                }
                tally[si] = {c, n};
            }
        };
        const int workers =
            std::min<int>(max_threads(), static_cast<int>(samples.size()));
        if (workers > 1) {
            std::atomic<size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (size_t si = next.fetch_add(1); si < samples.size();
                         si = next.fetch_add(1))
                        score_one(si);
                });
            }
            for (std::thread& th : pool) th.join();
        } else {
            for (size_t si = 0; si < samples.size(); ++si) score_one(si);
        }
        double correct = 0, total = 0;
        for (const auto& [c, n] : tally) {
            correct += c;
            total += n;
        }
        LengthGenResult r;
        r.length = len;
        r.accuracy = total > 0 ? correct / total : 0.0;
        if (task.sequence_metric()) {
            r.scaled = r.accuracy;
        } else {
            const double chance = task.random_accuracy();
            r.scaled = (r.accuracy - chance) / (1.0 - chance);
        }
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop

void TrainConfig::validate() const {
    require(lr >= 0, "TrainConfig: negative learning rate");
    require(batch_size >= 1, "TrainConfig: batch size must be positive");
    require(steps >= 1, "TrainConfig: step count must be positive");
    require(weight_decay >= 0, "TrainConfig: negative weight decay");
    require(clip_norm > 0, "TrainConfig: clip norm must be positive");
    require(warmup >= 0, "TrainConfig: negative warmup");
    require(len_min >= 1 && len_min <= len_max, "TrainConfig: bad length range");
    require(eval_samples >= 1, "TrainConfig: eval_samples must be positive");
    require(eval_interval >= 1, "TrainConfig: eval_interval must be positive");
    require(early_stop_scaled >= 0 && early_stop_scaled <= 1,
            "TrainConfig: early_stop_scaled must be in [0, 1]");
}

AdamW::AdamW(size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(ParamStore& store, double lr, double weight_decay, double clip_norm) {
    require(store.size() == m_.size(), "AdamW: parameter count changed");
    double norm2 = 0;
    for (double g : store.grads) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < store.values.size(); ++i) {
        const double g = store.grads[i] * scale;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        store.values[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * store.values[i]);
    }
    ++store.version;
}

double schedule_lr(const TrainConfig& cfg, long long step) {
    if (cfg.schedule == TrainConfig::Schedule::Constant) return cfg.lr;
    if (step < cfg.warmup) {
        return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
    }
    const long long span = std::max<long long>(1, cfg.steps - cfg.warmup);
    const double frac = static_cast<double>(step - cfg.warmup) / static_cast<double>(span);
    return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, frac)));
}

TrainResult train_loop(TrainableModel& model, const TaskSpec& task, const TrainConfig& cfg) {
    cfg.validate();
    require(model.spec.vocab >= task.vocab_size(),
            "train_loop: model vocabulary smaller than the task's");
    require(model.spec.n_out >= task.label_count(),
            "train_loop: model output vocabulary smaller than the task's");
    AdamW opt(model.params.size());
    TrainResult result;
    const Predictor predict = predictor_from_trainable(model);
    for (long long s = 0; s < cfg.steps; ++s) {
        const std::vector<Sample> batch =
            task.make(cfg.batch_size, cfg.len_min, cfg.len_max,
                      mix_seed(cfg.seed, 0xBA7C, static_cast<uint64_t>(s)));
        model.params.zero_grads();
        const double loss = masked_cross_entropy(model, batch, true);
        if (!std::isfinite(loss)) {
            throw TrainingDiverged("training loss became non-finite at step " +
                                   std::to_string(s));
        }
        if (s == 0) result.initial_loss = loss;
        result.final_loss = loss;
        const double lr = schedule_lr(cfg, s);
        opt.step(model.params, lr, cfg.weight_decay, cfg.clip_norm);

        if ((s + 1) % cfg.eval_interval == 0 || s + 1 == cfg.steps) {
            MetricPoint mp;
            mp.step = s + 1;
            mp.lr = lr;
            mp.loss = loss;
            if (!cfg.eval_lengths.empty()) {
                mp.eval = eval_length_gen(predict, task, cfg.eval_lengths, cfg.eval_samples,
                                          mix_seed(cfg.seed, 0xE7A1, static_cast<uint64_t>(s)));
            }
            const bool stop =
                cfg.early_stop_scaled > 0 && !mp.eval.empty() &&
                [&mp, &cfg] {
                    double sum = 0;
                    for (const LengthGenResult& r : mp.eval) sum += r.scaled;
                    return sum / static_cast<double>(mp.eval.size()) >= cfg.early_stop_scaled;
                }();
            result.history.push_back(std::move(mp));
            if (stop) break;
        }
    }
    return result;
}

std::string metrics_to_csv(const std::vector<MetricPoint>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "step,lr,loss";
    if (!history.empty()) {
        for (const LengthGenResult& r : history.front().eval) {
            out << ",scaled_len" << r.length;
        }
    }
    out << "\n";
    for (const MetricPoint& mp : history) {
        out << mp.step << "," << mp.lr << "," << mp.loss;
        for (const LengthGenResult& r : mp.eval) out << "," << r.scaled;
        out << "\n";
    }
    return out.str();
}

GradCheckReport grad_check(TrainableModel& model, const std::vector<Sample>& batch, double fd_eps,
                           int max_probes, uint64_t seed) {
    require(fd_eps > 0, "grad_check: epsilon must be positive");
    require(max_probes >= 1, "grad_check: need at least one probe");
    model.params.zero_grads();
    masked_cross_entropy(model, batch, true);
    const std::vector<double> analytic = model.params.grads;

    std::vector<size_t> probes;
    const size_t n = model.params.size();
    if (n <= static_cast<size_t>(max_probes)) {
        probes.resize(n);
        for (size_t i = 0; i < n; ++i) probes[i] = i;
    } else {
        Rng rng(seed);
        std::set<size_t> chosen;
        while (chosen.size() < static_cast<size_t>(max_probes)) {
            chosen.insert(static_cast<size_t>(rng.below(n)));
        }
        probes.assign(chosen.begin(), chosen.end());
    }

    GradCheckReport report;
    for (size_t idx : probes) {
        const double saved = model.params.values[idx];
        model.params.values[idx] = saved + fd_eps;
        const double up = masked_cross_entropy(model, batch, false);
        model.params.values[idx] = saved - fd_eps;
        const double down = masked_cross_entropy(model, batch, false);
        model.params.values[idx] = saved;
        const double fd = (up - down) / (2.0 * fd_eps);
        const double rel = std::abs(analytic[idx] - fd) /
                           std::max({std::abs(analytic[idx]), std::abs(fd), 1e-3});
        report.max_rel_err = std::max(report.max_rel_err, rel);
        ++report.params_checked;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string kind_tag(LayerKind k) {
    switch (k) {
        case LayerKind::Diagonal:
            return "diagonal";
        case LayerKind::Delta:
            return "delta";
        case LayerKind::FullMatrix:
            return "full_matrix";
    }
    throw ContractError("kind_tag: unreachable");
}

LayerKind kind_from_tag(const std::string& s) {
    if (s == "diagonal") return LayerKind::Diagonal;
    if (s == "delta") return LayerKind::Delta;
    if (s == "full_matrix") return LayerKind::FullMatrix;
    throw ContractError("TrainableModel: unknown layer kind " + s);
}

std::string range_tag(EigenRange r) {
    return r == EigenRange::UnitInterval ? "unit_interval" : "symmetric";
}

EigenRange range_from_tag(const std::string& s) {
    if (s == "unit_interval") return EigenRange::UnitInterval;
    if (s == "symmetric") return EigenRange::Symmetric;
    throw ContractError("TrainableModel: unknown eigen range " + s);
}

}  // namespace

std::string TrainableModel::to_json_text() const {
    nlohmann::ordered_json j;
    j["format"] = "trainable_model";
    j["spec"]["vocab"] = spec.vocab;
    j["spec"]["n_out"] = spec.n_out;
    j["spec"]["d_model"] = spec.d_model;
    j["spec"]["layers"] = nlohmann::ordered_json::array();
    for (const LayerSpec& l : spec.layers) {
        j["spec"]["layers"].push_back({{"kind", kind_tag(l.kind)}, {"range", range_tag(l.range)}});
    }
    j["params"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < params.segs.size(); ++i) {
        const ParamStore::Seg& s = params.segs[i];
        nlohmann::ordered_json seg;
        seg["name"] = s.name;
        seg["rows"] = s.rows;
        seg["cols"] = s.cols;
        seg["data"] = std::vector<double>(
            params.values.begin() + static_cast<long>(s.offset),
            params.values.begin() + static_cast<long>(s.offset + static_cast<size_t>(s.rows) * s.cols));
        j["params"].push_back(std::move(seg));
    }
    return j.dump();
}

TrainableModel TrainableModel::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("TrainableModel: invalid JSON: ") + e.what());
    }
    try {
        require(j.value("format", "") == "trainable_model",
                "TrainableModel: missing trainable_model format tag");
        TrainableSpec spec;
        spec.vocab = j.at("spec").at("vocab").get<int>();
        spec.n_out = j.at("spec").at("n_out").get<int>();
        spec.d_model = j.at("spec").at("d_model").get<int>();
        for (const auto& l : j.at("spec").at("layers")) {
            spec.layers.push_back(
                {kind_from_tag(l.at("kind").get<std::string>()),
                 range_from_tag(l.at("range").get<std::string>())});
        }
        TrainableModel m = build(spec, 0);
        require(j.at("params").size() == m.params.segs.size(),
                "TrainableModel: parameter segment count mismatch");
        for (size_t i = 0; i < m.params.segs.size(); ++i) {
            const auto& seg = j.at("params").at(i);
            const ParamStore::Seg& s = m.params.segs[i];
            require(seg.at("name").get<std::string>() == s.name &&
                        seg.at("rows").get<int>() == s.rows && seg.at("cols").get<int>() == s.cols,
                    "TrainableModel: parameter segment layout mismatch");
            const std::vector<double> data = seg.at("data").get<std::vector<double>>();
            require(data.size() == static_cast<size_t>(s.rows) * s.cols,
                    "TrainableModel: parameter data length mismatch");
            std::copy(data.begin(), data.end(),
                      m.params.values.begin() + static_cast<long>(s.offset));
        }
        ++m.params.version;
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("TrainableModel: malformed fields: ") + e.what());
    }
}

std::string TrainConfig::to_json_text() const {
    nlohmann::ordered_json j;
    j["lr"] = lr;
    j["batch_size"] = batch_size;
    j["steps"] = steps;
    j["weight_decay"] = weight_decay;
    j["clip_norm"] = clip_norm;
    j["schedule"] = schedule == Schedule::Constant ? "constant" : "cosine_warmup";
    j["warmup"] = warmup;
    j["seed"] = seed;
    j["len_min"] = len_min;
    j["len_max"] = len_max;
    j["eval_lengths"] = eval_lengths;
    j["eval_samples"] = eval_samples;
    j["eval_interval"] = eval_interval;
    j["early_stop_scaled"] = early_stop_scaled;
    return j.dump();
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("TrainConfig: invalid JSON: ") + e.what());
    }
    TrainConfig cfg;
    try {
        cfg.lr = j.value("lr", cfg.lr);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.steps = j.value("steps", cfg.steps);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
        if (j.contains("schedule")) {
            const std::string s = j.at("schedule").get<std::string>();
            if (s == "constant") {
                cfg.schedule = Schedule::Constant;
            } else if (s == "cosine_warmup") {
                cfg.schedule = Schedule::CosineWarmup;
            } else {
                throw ContractError("TrainConfig: unknown schedule " + s);
            }
        }
        cfg.warmup = j.value("warmup", cfg.warmup);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.len_min = j.value("len_min", cfg.len_min);
        cfg.len_max = j.value("len_max", cfg.len_max);
        if (j.contains("eval_lengths")) {
            cfg.eval_lengths = j.at("eval_lengths").get<std::vector<int>>();
        }
        cfg.eval_samples = j.value("eval_samples", cfg.eval_samples);
        cfg.eval_interval = j.value("eval_interval", cfg.eval_interval);
        cfg.early_stop_scaled = j.value("early_stop_scaled", cfg.early_stop_scaled);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("TrainConfig: malformed fields: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace statetrack
