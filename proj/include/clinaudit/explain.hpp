#pragma once

// Post-hoc explanations: global permutation importance, exact Shapley
// attribution by subset enumeration (small d), and surrogate fidelity.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"
#include "clinaudit/model.hpp"
#include "clinaudit/rng.hpp"

namespace clinaudit {

enum class AttributionScope { Global, Local };
enum class AttributionMethod { Permutation, Shapley, Surrogate };

struct Attribution {
    std::vector<double> values;  // one per feature
    AttributionScope scope = AttributionScope::Global;
    AttributionMethod method = AttributionMethod::Permutation;
};

inline double auc_metric(const PredictionSet& preds) {
    return roc_auc(preds).auc;
}

// importance_j = baseline metric - mean metric over n_repeats permutations
// of column j. A feature the model ignores scores exactly 0.
inline Attribution permutation_importance(
    const Model& model, const Dataset& ds, std::size_t n_repeats,
    std::uint64_t seed, const MetricFn& metric = auc_metric) {
    if (!model.trained) throw NumericError("model is not trained");
    if (n_repeats < 1) throw DataError("n_repeats must be >= 1");

    PredictionSet base;
    base.labels = ds.labels;
    base.probs = predict_proba(model, ds);
    const double baseline = metric(base);

    Rng rng(seed);
    Attribution attr;
    attr.scope = AttributionScope::Global;
    attr.method = AttributionMethod::Permutation;
    attr.values.assign(ds.d, 0.0);

    Dataset work = ds;
    for (std::size_t j = 0; j < ds.d; ++j) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n_repeats; ++r) {
            auto perm = shuffled_indices(ds.n, rng);
            for (std::size_t i = 0; i < ds.n; ++i)
                work.features[i * ds.d + j] = ds.at(perm[i], j);
            PredictionSet shuffled;
            shuffled.labels = ds.labels;
            shuffled.probs = predict_proba(model, work);
            sum += metric(shuffled);
        }
        attr.values[j] = baseline - sum / static_cast<double>(n_repeats);
        for (std::size_t i = 0; i < ds.n; ++i)
            work.features[i * ds.d + j] = ds.at(i, j);
    }
    return attr;
}

inline constexpr std::size_t kShapleyMaxFeatures = 12;

// Exact Shapley values for one instance. Absent features are marginalized by
// averaging the model over background rows (interventional flavor); the
// value function is evaluated once per coalition (2^d total).
inline Attribution shapley_exact(const Model& model,
                                 const std::vector<double>& instance,
                                 const Dataset& background) {
    if (!model.trained) throw NumericError("model is not trained");
    const std::size_t d = instance.size();
    if (d != background.d) throw DataError("instance width mismatch");
    if (d > kShapleyMaxFeatures)
        throw DataError("d=" + std::to_string(d) +
                        " exceeds the exact-enumeration limit of " +
                        std::to_string(kShapleyMaxFeatures) +
                        "; use permutation_importance for wide data");
    if (background.n == 0) throw DataError("empty background");

    const std::size_t n_subsets = std::size_t{1} << d;
    std::vector<double> value(n_subsets, 0.0);
    std::vector<double> x(d);
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        double sum = 0.0;
        for (std::size_t b = 0; b < background.n; ++b) {
            for (std::size_t j = 0; j < d; ++j)
                x[j] = (mask & (std::size_t{1} << j)) ? instance[j]
                                                      : background.at(b, j);
            sum += predict_proba(model, x.data());
        }
        value[mask] = sum / static_cast<double>(background.n);
    }

    // Shapley kernel weights |S|! (d-|S|-1)! / d!
    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t i = 1; i <= d; ++i)
        fact[i] = fact[i - 1] * static_cast<double>(i);

    Attribution attr;
    attr.scope = AttributionScope::Local;
    attr.method = AttributionMethod::Shapley;
    attr.values.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t bit = std::size_t{1} << j;
        for (std::size_t mask = 0; mask < n_subsets; ++mask) {
            if (mask & bit) continue;
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            const double w = fact[s] * fact[d - s - 1] / fact[d];
            attr.values[j] += w * (value[mask | bit] - value[mask]);
        }
    }
    return attr;
}

// Agreement rate of thresholded predictions between surrogate and task model.
inline double surrogate_fidelity(const Model& task_model, const Model& surrogate,
                                 const Dataset& eval, double threshold = 0.5) {
    const auto task = predict_proba(task_model, eval);
    const auto sur = predict_proba(surrogate, eval);
    double agree = 0.0;
    for (std::size_t i = 0; i < eval.n; ++i)
        if ((task[i] >= threshold) == (sur[i] >= threshold)) agree += 1.0;
    return agree / static_cast<double>(eval.n);
}

// Parsimony proxy for tree surrogates.
inline std::size_t surrogate_parsimony(const Model& surrogate) {
    if (surrogate.kind != ModelKind::Tree)
        throw DataError("parsimony is reported for tree surrogates");
    return tree_leaf_count(surrogate);
}

}  // namespace clinaudit
