#pragma once

// Adversary harness: shadow-model membership inference, FGSM / PGD evasion
// within an l-infinity ball, ZOO-style query-only gradient estimation, and
// baseline-vs-defended comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"
#include "clinaudit/model.hpp"

namespace clinaudit {

enum class MiaFeature { Confidence, Loss, Both };

struct MiaSetup {
    std::size_t shadow_count = 4;
    Architecture shadow_arch;
    TrainConfig shadow_cfg;
    MiaFeature features = MiaFeature::Both;
    std::uint64_t seed = 0;
};

struct AttackResult {
    std::vector<double> membership_scores;  // members first, then non-members
    double attack_auc = 0.0;
    double advantage = 0.0;  // max over thresholds of TPR - FPR
    double success_rate = 0.0;  // evasion attacks
    std::string config_tag;     // guards defense comparisons
};

namespace detail {

inline std::vector<double> attack_features(const Model& m, const double* x,
                                           int y, MiaFeature kind) {
    const double p = predict_proba(m, x);
    const double conf = std::max(p, 1.0 - p);
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    const double loss = y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
    switch (kind) {
        case MiaFeature::Confidence: return {conf};
        case MiaFeature::Loss: return {loss};
        default: return {conf, loss};
    }
}

inline double max_advantage(const PredictionSet& preds) {
    const auto curve = roc_auc(preds);
    double adv = 0.0;
    for (std::size_t i = 0; i < curve.tpr.size(); ++i)
        adv = std::max(adv, curve.tpr[i] - curve.fpr[i]);
    return adv;
}

}  // namespace detail

// Shadow attack: each shadow trains on half of its share of the shadow pool;
// its in/out rows become labelled examples for a logistic attack classifier,
// which is then scored on the target's members and non-members. Member and
// non-member evaluation sets are truncated to equal size so chance AUC is 0.5.
//
// Caller contract: members are target-training rows; non_members and
// shadow_pool are disjoint from them and from each other.
inline AttackResult mia_shadow_attack(const Model& target, const MiaSetup& setup,
                                      const Dataset& members,
                                      const Dataset& non_members,
                                      const Dataset& shadow_pool) {
    if (setup.shadow_count < 1) throw DataError("need at least one shadow");
    if (shadow_pool.n < setup.shadow_count * 4)
        throw DataError("shadow pool too small for " +
                        std::to_string(setup.shadow_count) + " shadows");

    const std::size_t fdim = setup.features == MiaFeature::Both ? 2 : 1;
    Dataset attack_train;
    attack_train.d = fdim;
    for (std::size_t j = 0; j < fdim; ++j)
        attack_train.feature_names.push_back("f" + std::to_string(j));

    Rng rng(setup.seed);
    auto order = shuffled_indices(shadow_pool.n, rng);
    const std::size_t share = shadow_pool.n / setup.shadow_count;
    for (std::size_t s = 0; s < setup.shadow_count; ++s) {
        std::vector<std::size_t> in_idx, out_idx;
        for (std::size_t i = 0; i < share; ++i) {
            const std::size_t row = order[s * share + i];
            (i < share / 2 ? in_idx : out_idx).push_back(row);
        }
        const Dataset in_ds = shadow_pool.subset(in_idx);
        const Dataset out_ds = shadow_pool.subset(out_idx);
        if (in_ds.single_class()) continue;  // unlucky shard, skip shadow

        TrainConfig cfg = setup.shadow_cfg;
        cfg.seed = setup.shadow_cfg.seed + s;
        const Model shadow = train(in_ds, setup.shadow_arch, cfg);

        auto add = [&](const Dataset& ds, int member_label) {
            for (std::size_t i = 0; i < ds.n; ++i) {
                const auto f = detail::attack_features(shadow, ds.row(i),
                                                       ds.labels[i],
                                                       setup.features);
                attack_train.features.insert(attack_train.features.end(),
                                             f.begin(), f.end());
                attack_train.labels.push_back(member_label);
            }
        };
        add(in_ds, 1);
        add(out_ds, 0);
    }
    attack_train.n = attack_train.labels.size();
    if (attack_train.n == 0 || attack_train.single_class())
        throw DataError("insufficient shadow data to train the attack model");

    Architecture attack_arch;
    attack_arch.input_dim = fdim;
    TrainConfig attack_cfg;
    attack_cfg.learning_rate = 0.5;
    attack_cfg.epochs = 200;
    attack_cfg.batch_size = 32;
    attack_cfg.seed = setup.seed;
    const Model attack_model = train(attack_train, attack_arch, attack_cfg);

    const std::size_t n_eval = std::min(members.n, non_members.n);
    if (n_eval == 0) throw DataError("empty member or non-member set");

    AttackResult result;
    PredictionSet eval;
    auto score = [&](const Dataset& ds, int member_label) {
        for (std::size_t i = 0; i < n_eval; ++i) {
            const auto f = detail::attack_features(target, ds.row(i),
                                                   ds.labels[i], setup.features);
            const double s = predict_proba(attack_model, f.data());
            result.membership_scores.push_back(s);
            eval.probs.push_back(s);
            eval.labels.push_back(member_label);
        }
    };
    score(members, 1);
    score(non_members, 0);
    result.attack_auc = roc_auc(eval).auc;
    result.advantage = detail::max_advantage(eval);
    result.config_tag = "mia:S=" + std::to_string(setup.shadow_count) +
                        ":f=" + std::to_string(static_cast<int>(setup.features));
    return result;
}

struct DomainBounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

// x' = x + eps * sign(grad_x loss), clamped to the feature domain.
inline std::vector<double> fgsm(const Model& model,
                                const std::vector<double>& instance, int label,
                                double eps, const DomainBounds& bounds = {}) {
    if (model.kind == ModelKind::Tree)
        throw NumericError("FGSM requires a differentiable model");
    if (eps < 0.0) throw DataError("eps must be >= 0");
    const auto grad = input_gradient(model, instance.data(), label);
    std::vector<double> out(instance.size());
    for (std::size_t j = 0; j < instance.size(); ++j) {
        const double sign = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
        out[j] = std::clamp(instance[j] + eps * sign, bounds.lo, bounds.hi);
    }
    return out;
}

// Iterated gradient-sign steps with projection onto the eps-ball around the
// start point (and the domain) after every step.
inline std::vector<double> pgd(const Model& model,
                               const std::vector<double>& instance, int label,
                               double eps, double step, std::size_t iters,
                               const DomainBounds& bounds = {}) {
    if (model.kind == ModelKind::Tree)
        throw NumericError("PGD requires a differentiable model");
    if (eps < 0.0 || step < 0.0) throw DataError("eps and step must be >= 0");
    std::vector<double> x = instance;
    for (std::size_t k = 0; k < iters; ++k) {
        const auto grad = input_gradient(model, x.data(), label);
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double sign =
                grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
            double v = x[j] + step * sign;
            v = std::clamp(v, instance[j] - eps, instance[j] + eps);
            x[j] = std::clamp(v, bounds.lo, bounds.hi);
        }
    }
    return x;
}

struct ZooGradient {
    std::vector<double> gradient;
    bool underflow_warning = false;
};

// Query-only central differences: (f(x + h e_j) - f(x - h e_j)) / 2h,
// 2d queries total.
inline ZooGradient zoo_gradient(
    const std::function<double(const std::vector<double>&)>& query,
    const std::vector<double>& instance, double h) {
    if (!(h > 0.0)) throw DataError("h must be > 0");
    ZooGradient out;
    out.gradient.assign(instance.size(), 0.0);
    std::vector<double> x = instance;
    for (std::size_t j = 0; j < instance.size(); ++j) {
        x[j] = instance[j] + h;
        const double up = query(x);
        x[j] = instance[j] - h;
        const double down = query(x);
        x[j] = instance[j];
        if (up == down && up != 0.0) out.underflow_warning = true;
        out.gradient[j] = (up - down) / (2.0 * h);
    }
    return out;
}

// Query interface to a model's per-example loss, for ZOO-driven attacks.
inline std::function<double(const std::vector<double>&)> loss_query(
    const Model& model, int label) {
    return [&model, label](const std::vector<double>& x) {
        const double p =
            std::clamp(predict_proba(model, x.data()), kProbClamp,
                       1.0 - kProbClamp);
        return label == 1 ? -std::log(p) : -std::log(1.0 - p);
    };
}

// Evasion success = prediction flips across the 0.5 threshold.
inline double evasion_success_rate(const Model& model, const Dataset& ds,
                                   const std::vector<std::vector<double>>& adv) {
    if (adv.size() != ds.n) throw DataError("adversarial set size mismatch");
    double flips = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const bool before = predict_proba(model, ds.row(i)) >= 0.5;
        const bool after = predict_proba(model, adv[i].data()) >= 0.5;
        if (before != after) flips += 1.0;
    }
    return flips / static_cast<double>(ds.n);
}

struct DefenseComparison {
    AttackResult baseline;
    AttackResult defended;
    double auc_delta = 0.0;
    double success_delta = 0.0;
};

// Side-by-side attack results; configurations must match.
inline DefenseComparison evaluate_defense(const AttackResult& baseline,
                                          const AttackResult& defended) {
    if (baseline.config_tag != defended.config_tag)
        throw DataError("mismatched attack configurations: '" +
                        baseline.config_tag + "' vs '" + defended.config_tag +
                        "'");
    DefenseComparison cmp;
    cmp.baseline = baseline;
    cmp.defended = defended;
    cmp.auc_delta = defended.attack_auc - baseline.attack_auc;
    cmp.success_delta = defended.success_rate - baseline.success_rate;
    return cmp;
}

}  // namespace clinaudit
