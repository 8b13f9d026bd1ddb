#pragma once

// Small trainable predictors with analytic gradients: logistic regression,
// MLPs (relu or softplus activations) and a CART-style decision tree.
//
// The SGD core is shared between plain training and DP-SGD: the batch
// gradient is always the mean of per-example gradients accumulated in index
// order, and clipping/noise are applied on top. With noise_scale = 0 and an
// infinite clip norm the two paths are bit-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/rng.hpp"

#include "json.hpp"

namespace clinaudit {

// Probability clamp inside log-loss to avoid log(0).
constexpr double kProbClamp = 1e-12;

enum class ActivationKind { Relu, Softplus };

struct ActivationSpec {
    ActivationKind kind = ActivationKind::Relu;
    double beta = 1.0;  // softplus sharpness, > 0
};

struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  // empty = logistic regression
    ActivationSpec activation;

    // Flat parameter count: per layer a (out x in) weight block then biases.
    std::size_t param_count() const {
        std::size_t count = 0, in = input_dim;
        for (std::size_t h : hidden) {
            count += h * in + h;
            in = h;
        }
        count += in + 1;  // final logit layer
        return count;
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prob = 0.0;     // class-1 fraction at this node
    std::size_t count = 0; // training rows reaching this node
};

enum class ModelKind { Logistic, Mlp, Tree };

struct Model {
    ModelKind kind = ModelKind::Logistic;
    Architecture arch;
    std::vector<double> params;   // logistic / mlp
    std::vector<TreeNode> nodes;  // tree
    bool trained = false;
};

inline double softplus(double z, double beta) {
    const double bz = beta * z;
    if (bz > 30.0) return z;
    return std::log1p(std::exp(bz)) / beta;
}

inline double activate(double z, const ActivationSpec& a) {
    return a.kind == ActivationKind::Relu ? std::max(0.0, z)
                                          : softplus(z, a.beta);
}

inline double activate_deriv(double z, const ActivationSpec& a) {
    return a.kind == ActivationKind::Relu ? (z > 0.0 ? 1.0 : 0.0)
                                          : sigmoid(a.beta * z);
}

namespace detail {

struct ForwardTrace {
    std::vector<std::vector<double>> pre;   // pre-activation per hidden layer
    std::vector<std::vector<double>> post;  // post-activation per hidden layer
    double logit = 0.0;
};

inline ForwardTrace forward(const Architecture& arch,
                            const std::vector<double>& params,
                            const double* x) {
    ForwardTrace t;
    std::size_t off = 0, in = arch.input_dim;
    std::vector<double> cur(x, x + in);
    for (std::size_t h : arch.hidden) {
        std::vector<double> pre(h, 0.0);
        const double* w = params.data() + off;
        const double* b = params.data() + off + h * in;
        for (std::size_t o = 0; o < h; ++o) {
            double z = b[o];
            for (std::size_t j = 0; j < in; ++j) z += w[o * in + j] * cur[j];
            pre[o] = z;
        }
        std::vector<double> post(h);
        for (std::size_t o = 0; o < h; ++o)
            post[o] = activate(pre[o], arch.activation);
        t.pre.push_back(std::move(pre));
        t.post.push_back(post);
        cur = std::move(post);
        off += h * in + h;
        in = h;
    }
    const double* w = params.data() + off;
    double z = params[off + in];  // final bias
    for (std::size_t j = 0; j < in; ++j) z += w[j] * cur[j];
    t.logit = z;
    return t;
}

// Backprop of d(loss)/d(logit) = delta into parameter space; optionally
// also into the input (for evasion attacks).
inline void backward(const Architecture& arch, const std::vector<double>& params,
                     const double* x, const ForwardTrace& t, double delta,
                     double* grad_params, double* grad_input) {
    // Offsets of each layer block.
    std::vector<std::size_t> offs;
    std::size_t off = 0, in = arch.input_dim;
    for (std::size_t h : arch.hidden) {
        offs.push_back(off);
        off += h * in + h;
        in = h;
    }
    const std::size_t final_off = off;

    const double* last_in = arch.hidden.empty() ? x : t.post.back().data();
    const std::size_t last_w = in;

    // Final layer.
    for (std::size_t j = 0; j < last_w; ++j)
        grad_params[final_off + j] += delta * last_in[j];
    grad_params[final_off + last_w] += delta;  // bias

    std::vector<double> upstream(last_w);
    for (std::size_t j = 0; j < last_w; ++j)
        upstream[j] = delta * params[final_off + j];

    for (std::size_t l = arch.hidden.size(); l-- > 0;) {
        const std::size_t h = arch.hidden[l];
        const std::size_t layer_in = l == 0 ? arch.input_dim : arch.hidden[l - 1];
        const double* w = params.data() + offs[l];
        const double* prev = l == 0 ? x : t.post[l - 1].data();

        std::vector<double> dz(h);
        for (std::size_t o = 0; o < h; ++o)
            dz[o] = upstream[o] * activate_deriv(t.pre[l][o], arch.activation);

        double* gw = grad_params + offs[l];
        double* gb = grad_params + offs[l] + h * layer_in;
        for (std::size_t o = 0; o < h; ++o) {
            for (std::size_t j = 0; j < layer_in; ++j)
                gw[o * layer_in + j] += dz[o] * prev[j];
            gb[o] += dz[o];
        }

        std::vector<double> next(layer_in, 0.0);
        for (std::size_t o = 0; o < h; ++o)
            for (std::size_t j = 0; j < layer_in; ++j)
                next[j] += dz[o] * w[o * layer_in + j];
        upstream = std::move(next);
    }
    if (grad_input)
        for (std::size_t j = 0; j < arch.input_dim; ++j)
            grad_input[j] += upstream[j];
}

inline int tree_leaf_for(const std::vector<TreeNode>& nodes, const double* x) {
    int cur = 0;
    while (nodes[cur].feature >= 0) {
        cur = x[nodes[cur].feature] < nodes[cur].threshold ? nodes[cur].left
                                                           : nodes[cur].right;
    }
    return cur;
}

}  // namespace detail

inline double predict_logit(const Model& m, const double* x) {
    return detail::forward(m.arch, m.params, x).logit;
}

inline double predict_proba(const Model& m, const double* x) {
    if (!m.trained) throw NumericError("model is not trained");
    if (m.kind == ModelKind::Tree)
        return m.nodes[detail::tree_leaf_for(m.nodes, x)].prob;
    return sigmoid(predict_logit(m, x));
}

inline std::vector<double> predict_proba(const Model& m, const Dataset& ds) {
    if (ds.d != m.arch.input_dim) throw DataError("feature width mismatch");
    std::vector<double> out(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) out[i] = predict_proba(m, ds.row(i));
    return out;
}

// Per-example loss and gradient: clamped log-loss plus (lambda/2)*||w||^2
// on weight coordinates (biases excluded from the penalty).
struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

// Marks which flat parameter coordinates are weights (true) vs biases.
inline std::vector<bool> weight_mask(const Architecture& arch) {
    std::vector<bool> mask;
    mask.reserve(arch.param_count());
    std::size_t in = arch.input_dim;
    for (std::size_t h : arch.hidden) {
        mask.insert(mask.end(), h * in, true);
        mask.insert(mask.end(), h, false);
        in = h;
    }
    mask.insert(mask.end(), in, true);
    mask.push_back(false);
    return mask;
}

inline double log_loss(double p, int y) {
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace detail

// Loss and gradient of one example; grad must be zero-initialized with
// param_count() entries.
inline double example_loss_grad(const Architecture& arch,
                                const std::vector<double>& params,
                                const double* x, int y, double lambda,
                                const std::vector<bool>& wmask,
                                std::vector<double>& grad) {
    const auto trace = detail::forward(arch, params, x);
    const double p = sigmoid(trace.logit);
    // d(logloss)/d(logit) = p - y, independent of the clamp away from the
    // saturated region.
    detail::backward(arch, params, x, trace, p - static_cast<double>(y),
                     grad.data(), nullptr);
    double loss = detail::log_loss(p, y);
    if (lambda > 0.0) {
        double sq = 0.0;
        for (std::size_t j = 0; j < params.size(); ++j) {
            if (wmask[j]) {
                grad[j] += lambda * params[j];
                sq += params[j] * params[j];
            }
        }
        loss += 0.5 * lambda * sq;
    }
    return loss;
}

// Mean loss and gradient over a batch (whole dataset when idx is empty).
inline std::pair<double, std::vector<double>> loss_and_grad(
    const Model& m, const Dataset& ds, double lambda,
    const std::vector<std::size_t>& idx = {}) {
    if (m.kind == ModelKind::Tree)
        throw NumericError("tree models have no gradient");
    std::vector<std::size_t> all;
    const std::vector<std::size_t>* use = &idx;
    if (idx.empty()) {
        all.resize(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) all[i] = i;
        use = &all;
    }
    if (use->empty()) throw DataError("empty batch");
    const auto wmask = detail::weight_mask(m.arch);
    std::vector<double> grad(m.arch.param_count(), 0.0);
    std::vector<double> gi(m.arch.param_count());
    double loss = 0.0;
    for (std::size_t i : *use) {
        std::fill(gi.begin(), gi.end(), 0.0);
        loss += example_loss_grad(m.arch, m.params, ds.row(i), ds.labels[i],
                                  lambda, wmask, gi);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += gi[j];
    }
    const double inv = 1.0 / static_cast<double>(use->size());
    loss *= inv;
    for (double& g : grad) g *= inv;
    return {loss, std::move(grad)};
}

// Gradient of the per-example loss with respect to the input features.
inline std::vector<double> input_gradient(const Model& m, const double* x,
                                          int y) {
    if (m.kind == ModelKind::Tree)
        throw NumericError("tree models have no input gradient");
    const auto trace = detail::forward(m.arch, m.params, x);
    const double p = sigmoid(trace.logit);
    std::vector<double> gx(m.arch.input_dim, 0.0);
    std::vector<double> gp(m.arch.param_count(), 0.0);
    detail::backward(m.arch, m.params, x, trace, p - static_cast<double>(y),
                     gp.data(), gx.data());
    return gx;
}

inline Model init_model(const Architecture& arch, std::uint64_t seed) {
    Model m;
    m.kind = arch.hidden.empty() ? ModelKind::Logistic : ModelKind::Mlp;
    m.arch = arch;
    m.params.assign(arch.param_count(), 0.0);
    if (!arch.hidden.empty()) {
        // Small deterministic He-style init; biases stay zero.
        Rng rng(seed ^ 0x5eedf00dULL);
        const auto wmask = detail::weight_mask(arch);
        std::size_t off = 0, in = arch.input_dim;
        std::vector<std::size_t> fan;
        for (std::size_t h : arch.hidden) {
            for (std::size_t j = 0; j < h * in; ++j) fan.push_back(in);
            for (std::size_t j = 0; j < h; ++j) fan.push_back(0);
            off += h * in + h;
            in = h;
        }
        for (std::size_t j = 0; j < in; ++j) fan.push_back(in);
        fan.push_back(0);
        for (std::size_t j = 0; j < m.params.size(); ++j)
            if (wmask[j])
                m.params[j] = rng.normal() /
                              std::sqrt(static_cast<double>(fan[j]));
    }
    return m;
}

struct SgdStepRecord {
    std::size_t step = 0;
    double max_raw_norm = 0.0;
    double max_clipped_norm = 0.0;
    double noise_scale = 0.0;
    double loss = 0.0;
};

// Shared SGD loop: shuffled fixed-size batches per epoch; per-example
// gradients clipped to norm <= clip_norm, averaged, Gaussian noise
// N(0, sigma^2 C^2 I) added when noise_scale > 0. Noise uses a stream
// separate from the shuffle stream so the private and non-private paths
// see identical batch schedules.
inline Model sgd_train(const Dataset& ds, const Architecture& arch,
                       const TrainConfig& cfg,
                       double clip_norm = std::numeric_limits<double>::infinity(),
                       double noise_scale = 0.0,
                       std::vector<SgdStepRecord>* audit = nullptr,
                       const std::vector<double>* init_params = nullptr,
                       Rng* shuffle_rng = nullptr) {
    if (ds.single_class())
        throw DataError("training requires both classes to be present");
    if (arch.input_dim != ds.d) throw DataError("architecture width mismatch");
    if (arch.hidden.size() > 3)
        throw DataError("at most 3 hidden layers supported");
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1)
        throw DataError("bad train config");

    Model m = init_model(arch, cfg.seed);
    if (init_params) {
        if (init_params->size() != m.params.size())
            throw DataError("init parameter length mismatch");
        m.params = *init_params;
    }

    Rng local_rng(cfg.seed);
    Rng& batch_rng = shuffle_rng ? *shuffle_rng : local_rng;
    Rng noise_rng(cfg.seed ^ 0x9d2c5680dULL);

    const auto wmask = detail::weight_mask(arch);
    const std::size_t B = std::min(cfg.batch_size, ds.n);
    std::vector<double> gi(m.params.size());
    std::vector<double> gsum(m.params.size());
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled_indices(ds.n, batch_rng);
        for (std::size_t start = 0; start < ds.n; start += B) {
            const std::size_t end = std::min(start + B, ds.n);
            std::fill(gsum.begin(), gsum.end(), 0.0);
            double batch_loss = 0.0, max_raw = 0.0, max_clipped = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t i = order[s];
                std::fill(gi.begin(), gi.end(), 0.0);
                batch_loss += example_loss_grad(arch, m.params, ds.row(i),
                                                ds.labels[i], cfg.weight_decay,
                                                wmask, gi);
                double norm = 0.0;
                for (double g : gi) norm += g * g;
                norm = std::sqrt(norm);
                max_raw = std::max(max_raw, norm);
                const double factor = std::max(1.0, norm / clip_norm);
                for (std::size_t j = 0; j < gi.size(); ++j)
                    gsum[j] += gi[j] / factor;
                max_clipped = std::max(max_clipped, norm / factor);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            batch_loss *= inv;
            if (!std::isfinite(batch_loss))
                throw NumericError("divergence at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(step));
            for (std::size_t j = 0; j < m.params.size(); ++j) {
                double g = gsum[j] * inv;
                if (noise_scale > 0.0)
                    g += noise_scale * clip_norm * noise_rng.normal();
                m.params[j] -= cfg.learning_rate * g;
            }
            if (audit)
                audit->push_back({step, max_raw, max_clipped,
                                  noise_scale, batch_loss});
            ++step;
        }
    }
    for (double p : m.params)
        if (!std::isfinite(p))
            throw NumericError("non-finite parameters after training");
    m.trained = true;
    return m;
}

inline Model train(const Dataset& ds, const Architecture& arch,
                   const TrainConfig& cfg) {
    return sgd_train(ds, arch, cfg);
}

// ---------------------------------------------------------------------------
// Decision tree (CART, Gini impurity, midpoint thresholds).

namespace detail {

inline double gini(std::size_t pos, std::size_t total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

inline int build_tree(const Dataset& ds, std::vector<std::size_t>& idx,
                      std::size_t depth, std::size_t max_depth,
                      std::size_t min_leaf, std::vector<TreeNode>& nodes) {
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += static_cast<std::size_t>(ds.labels[i]);

    TreeNode node;
    node.count = idx.size();
    node.prob = static_cast<double>(pos) / static_cast<double>(idx.size());

    bool split_found = false;
    std::size_t best_feature = 0;
    double best_threshold = 0.0, best_score = gini(pos, idx.size());

    if (depth < max_depth && pos > 0 && pos < idx.size()) {
        const double parent = gini(pos, idx.size());
        for (std::size_t j = 0; j < ds.d; ++j) {
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return ds.at(a, j) < ds.at(b, j);
                      });
            std::size_t left_pos = 0;
            for (std::size_t s = 0; s + 1 < idx.size(); ++s) {
                left_pos += static_cast<std::size_t>(ds.labels[idx[s]]);
                const double lo = ds.at(idx[s], j), hi = ds.at(idx[s + 1], j);
                if (lo == hi) continue;
                const std::size_t nl = s + 1, nr = idx.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double wl = static_cast<double>(nl) / idx.size();
                const double score = wl * gini(left_pos, nl) +
                                     (1.0 - wl) * gini(pos - left_pos, nr);
                if (score < best_score - 1e-15 && score < parent) {
                    best_score = score;
                    best_feature = j;
                    best_threshold = 0.5 * (lo + hi);
                    split_found = true;
                }
            }
        }
    }

    const int my_id = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (!split_found) return my_id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
        (ds.at(i, best_feature) < best_threshold ? left : right).push_back(i);
    nodes[my_id].feature = static_cast<int>(best_feature);
    nodes[my_id].threshold = best_threshold;
    nodes[my_id].left =
        build_tree(ds, left, depth + 1, max_depth, min_leaf, nodes);
    nodes[my_id].right =
        build_tree(ds, right, depth + 1, max_depth, min_leaf, nodes);
    return my_id;
}

}  // namespace detail

inline Model train_tree(const Dataset& ds, std::size_t max_depth,
                        std::size_t min_leaf = 1) {
    if (ds.single_class())
        throw DataError("training requires both classes to be present");
    if (min_leaf < 1) throw DataError("min_leaf must be >= 1");
    Model m;
    m.kind = ModelKind::Tree;
    m.arch.input_dim = ds.d;
    std::vector<std::size_t> idx(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) idx[i] = i;
    detail::build_tree(ds, idx, 0, max_depth, min_leaf, m.nodes);
    m.trained = true;
    return m;
}

inline std::size_t tree_leaf_count(const Model& m) {
    std::size_t leaves = 0;
    for (const auto& n : m.nodes)
        if (n.feature < 0) ++leaves;
    return leaves;
}

// ---------------------------------------------------------------------------
// Versioned JSON save/load.

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json model_to_json(const Model& m) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["kind"] = m.kind == ModelKind::Logistic ? "logistic"
               : m.kind == ModelKind::Mlp    ? "mlp"
                                             : "tree";
    j["architecture"] = {
        {"input_dim", m.arch.input_dim},
        {"hidden", m.arch.hidden},
        {"activation",
         {{"kind", m.arch.activation.kind == ActivationKind::Relu ? "relu"
                                                                  : "softplus"},
          {"beta", m.arch.activation.beta}}}};
    if (m.kind == ModelKind::Tree) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : m.nodes)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"prob", n.prob},
                             {"count", n.count}});
        j["nodes"] = nodes;
    } else {
        j["parameters"] = m.params;
    }
    return j;
}

inline Model model_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
        throw DataError("unsupported model schema version");
    Model m;
    const std::string kind = j.at("kind").get<std::string>();
    m.kind = kind == "logistic" ? ModelKind::Logistic
            : kind == "mlp"    ? ModelKind::Mlp
            : kind == "tree"   ? ModelKind::Tree
                               : throw DataError("unknown model kind " + kind);
    const auto& a = j.at("architecture");
    m.arch.input_dim = a.at("input_dim").get<std::size_t>();
    m.arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    const auto& act = a.at("activation");
    m.arch.activation.kind = act.at("kind").get<std::string>() == "relu"
                                 ? ActivationKind::Relu
                                 : ActivationKind::Softplus;
    m.arch.activation.beta = act.at("beta").get<double>();
    if (m.kind == ModelKind::Tree) {
        for (const auto& nj : j.at("nodes")) {
            TreeNode n;
            n.feature = nj.at("feature").get<int>();
            n.threshold = nj.at("threshold").get<double>();
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
            n.prob = nj.at("prob").get<double>();
            n.count = nj.at("count").get<std::size_t>();
            m.nodes.push_back(n);
        }
    } else {
        m.params = j.at("parameters").get<std::vector<double>>();
        if (m.params.size() != m.arch.param_count())
            throw DataError("parameter vector length does not match architecture");
    }
    m.trained = true;
    return m;
}

}  // namespace clinaudit
