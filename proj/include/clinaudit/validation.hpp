#pragma once

// Cross-validation orchestration: plain/stratified/LOOCV k-fold, repeated
// and nested CV, and external-cohort evaluation.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"
#include "clinaudit/model.hpp"

namespace clinaudit {

struct NamedMetric {
    std::string name;
    MetricFn fn;
};

inline std::vector<NamedMetric> default_metrics() {
    return {
        {"accuracy",
         [](const PredictionSet& p) {
             return 1.0 - empirical_risk(p, LossKind::ZeroOne);
         }},
        {"auc", [](const PredictionSet& p) { return roc_auc(p).auc; }},
        {"log_loss",
         [](const PredictionSet& p) {
             return empirical_risk(p, LossKind::LogLoss);
         }},
    };
}

struct CvResult {
    std::vector<std::string> metric_names;
    std::vector<std::vector<double>> per_fold;  // k rows x metrics
    std::vector<double> mean;
    std::vector<double> sd;
    // AUC over all out-of-fold predictions pooled together; differs from the
    // per-fold mean AUC in general, so both are reported.
    double pooled_auc = 0.0;
    FoldPlan plan;
    std::vector<double> chosen_hyper;  // nested CV only, one per outer fold
};

namespace detail {

// Metrics undefined on some fold (e.g. AUC on a singleton LOOCV fold) are
// recorded as NaN; means and sds aggregate over the defined entries only.
inline void finish_cv(CvResult& r) {
    const std::size_t m = r.metric_names.size();
    r.mean.assign(m, 0.0);
    r.sd.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0, count = 0.0;
        for (const auto& row : r.per_fold)
            if (!std::isnan(row[j])) {
                sum += row[j];
                count += 1.0;
            }
        r.mean[j] = count > 0.0 ? sum / count
                                : std::numeric_limits<double>::quiet_NaN();
        if (count > 1.0) {
            double ss = 0.0;
            for (const auto& row : r.per_fold)
                if (!std::isnan(row[j]))
                    ss += (row[j] - r.mean[j]) * (row[j] - r.mean[j]);
            r.sd[j] = std::sqrt(ss / (count - 1.0));
        }
    }
}

inline double metric_or_nan(const NamedMetric& m, const PredictionSet& preds) {
    try {
        return m.fn(preds);
    } catch (const DataError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace detail

// The model is retrained on each fold's training side; test rows are never
// seen by that fold's training.
inline CvResult cross_validate(const Dataset& ds, const Architecture& arch,
                               const TrainConfig& cfg, const FoldPlan& plan,
                               const std::vector<NamedMetric>& metrics =
                                   default_metrics()) {
    if (plan.assignments.size() != ds.n)
        throw DataError("fold plan does not match dataset");
    CvResult result;
    result.plan = plan;
    for (const auto& m : metrics) result.metric_names.push_back(m.name);

    PredictionSet pooled;
    for (std::size_t fold = 0; fold < plan.k; ++fold) {
        const auto train_idx = plan.train_indices(fold);
        const auto test_idx = plan.test_indices(fold);
        const Dataset train_ds = ds.subset(train_idx);
        const Dataset test_ds = ds.subset(test_idx);
        if (train_ds.single_class())
            throw DataError("fold " + std::to_string(fold) +
                            ": training side is single-class");
        const Model model = train(train_ds, arch, cfg);
        PredictionSet preds;
        preds.labels = test_ds.labels;
        preds.probs = predict_proba(model, test_ds);
        std::vector<double> row;
        for (const auto& m : metrics) row.push_back(detail::metric_or_nan(m, preds));
        result.per_fold.push_back(std::move(row));
        pooled.labels.insert(pooled.labels.end(), preds.labels.begin(),
                             preds.labels.end());
        pooled.probs.insert(pooled.probs.end(), preds.probs.begin(),
                            preds.probs.end());
    }
    detail::finish_cv(result);
    if (pooled.both_classes()) result.pooled_auc = roc_auc(pooled).auc;
    return result;
}

// Repeated CV: r independent seeds, per-fold rows concatenated.
inline CvResult repeated_cross_validate(const Dataset& ds,
                                        const Architecture& arch,
                                        const TrainConfig& cfg, std::size_t k,
                                        FoldMode mode, std::size_t repeats,
                                        std::uint64_t seed,
                                        const std::vector<NamedMetric>& metrics =
                                            default_metrics()) {
    if (repeats < 1) throw DataError("repeats must be >= 1");
    CvResult combined;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto plan = make_folds(ds, k, mode, seed + r);
        auto one = cross_validate(ds, arch, cfg, plan, metrics);
        if (r == 0) {
            combined = one;
        } else {
            combined.per_fold.insert(combined.per_fold.end(),
                                     one.per_fold.begin(), one.per_fold.end());
        }
    }
    detail::finish_cv(combined);
    return combined;
}

// Hyperparameter (weight decay) selection on inner folds of each outer
// training side; the outer test rows never touch the selection. Ties break
// to the smallest lambda.
inline CvResult nested_cross_validate(const Dataset& ds, const Architecture& arch,
                                      std::vector<double> lambda_grid,
                                      const FoldPlan& outer_plan,
                                      std::size_t inner_k, const TrainConfig& cfg,
                                      const std::vector<NamedMetric>& metrics =
                                          default_metrics()) {
    if (lambda_grid.empty()) throw DataError("empty hyperparameter grid");
    std::sort(lambda_grid.begin(), lambda_grid.end());

    CvResult result;
    result.plan = outer_plan;
    for (const auto& m : metrics) result.metric_names.push_back(m.name);

    PredictionSet pooled;
    for (std::size_t fold = 0; fold < outer_plan.k; ++fold) {
        const Dataset outer_train = ds.subset(outer_plan.train_indices(fold));
        const Dataset outer_test = ds.subset(outer_plan.test_indices(fold));
        if (outer_train.single_class())
            throw DataError("outer fold " + std::to_string(fold) +
                            ": training side is single-class");

        double best_lambda = lambda_grid.front();
        double best_loss = std::numeric_limits<double>::infinity();
        const auto inner_plan =
            make_folds(outer_train, inner_k,
                       outer_plan.stratified ? FoldMode::Stratified
                                             : FoldMode::Plain,
                       cfg.seed + fold + 1);
        for (double lambda : lambda_grid) {
            TrainConfig inner_cfg = cfg;
            inner_cfg.weight_decay = lambda;
            double loss_sum = 0.0;
            for (std::size_t inner = 0; inner < inner_plan.k; ++inner) {
                const Dataset tr =
                    outer_train.subset(inner_plan.train_indices(inner));
                const Dataset te =
                    outer_train.subset(inner_plan.test_indices(inner));
                const Model model = train(tr, arch, inner_cfg);
                PredictionSet preds;
                preds.labels = te.labels;
                preds.probs = predict_proba(model, te);
                loss_sum += empirical_risk(preds, LossKind::LogLoss);
            }
            const double mean_loss = loss_sum / static_cast<double>(inner_plan.k);
            if (mean_loss < best_loss) {  // strict: ties keep smaller lambda
                best_loss = mean_loss;
                best_lambda = lambda;
            }
        }

        TrainConfig outer_cfg = cfg;
        outer_cfg.weight_decay = best_lambda;
        const Model model = train(outer_train, arch, outer_cfg);
        PredictionSet preds;
        preds.labels = outer_test.labels;
        preds.probs = predict_proba(model, outer_test);
        std::vector<double> row;
        for (const auto& m : metrics) row.push_back(detail::metric_or_nan(m, preds));
        result.per_fold.push_back(std::move(row));
        result.chosen_hyper.push_back(best_lambda);
        pooled.labels.insert(pooled.labels.end(), preds.labels.begin(),
                             preds.labels.end());
        pooled.probs.insert(pooled.probs.end(), preds.probs.begin(),
                            preds.probs.end());
    }
    detail::finish_cv(result);
    if (pooled.both_classes()) result.pooled_auc = roc_auc(pooled).auc;
    return result;
}

// External-cohort evaluation: no training occurs.
inline std::map<std::string, double> evaluate_external(
    const Model& model, const Dataset& external,
    const std::vector<NamedMetric>& metrics = default_metrics()) {
    if (external.d != model.arch.input_dim)
        throw DataError("schema mismatch: external cohort has " +
                        std::to_string(external.d) + " features, model expects " +
                        std::to_string(model.arch.input_dim));
    PredictionSet preds;
    preds.labels = external.labels;
    preds.probs = predict_proba(model, external);
    std::map<std::string, double> report;
    for (const auto& m : metrics) report[m.name] = m.fn(preds);
    return report;
}

}  // namespace clinaudit
