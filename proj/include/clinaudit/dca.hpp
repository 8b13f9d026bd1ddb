#pragma once

// Decision curve analysis: net benefit across threshold probabilities with
// treat-all / treat-none and binary-test comparators.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"

namespace clinaudit {

// NB = TP/N - (FP/N) * t/(1-t), classifying positive at p >= t.
inline double net_benefit(const PredictionSet& preds, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw DataError("threshold must be strictly inside (0,1)");
    const ConfusionCounts c = confusion(preds, threshold);
    const double n = static_cast<double>(c.total());
    return static_cast<double>(c.tp) / n -
           static_cast<double>(c.fp) / n * threshold / (1.0 - threshold);
}

struct DecisionCurve {
    std::vector<double> thresholds;  // ascending, strictly inside (0,1)
    std::vector<double> nb_model;
    std::vector<double> nb_treat_all;
    std::vector<double> nb_treat_none;  // identically 0
    std::map<std::string, std::vector<double>> comparators;
};

struct GridSpec {
    double lo = 0.01;
    double hi = 0.99;
    double step = 0.01;
};

inline std::vector<double> threshold_grid(const GridSpec& g) {
    if (!(g.lo > 0.0 && g.hi < 1.0 && g.lo <= g.hi && g.step > 0.0))
        throw DataError("grid must lie strictly inside (0,1)");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double t = g.lo + g.step * i;
        if (t > g.hi + 1e-12) break;
        grid.push_back(t);
    }
    if (grid.empty()) throw DataError("empty threshold grid");
    return grid;
}

// A binary diagnostic test comparator has one fixed TP/FP count that is
// reused at every threshold.
inline DecisionCurve decision_curve(
    const PredictionSet& preds, const GridSpec& grid_spec = {},
    const std::map<std::string, std::vector<int>>& binary_tests = {}) {
    preds.validate();
    DecisionCurve curve;
    curve.thresholds = threshold_grid(grid_spec);
    const double n = static_cast<double>(preds.size());
    double pos = 0.0;
    for (int y : preds.labels) pos += y;
    const double prevalence = pos / n;

    std::map<std::string, ConfusionCounts> test_counts;
    for (const auto& [name, calls] : binary_tests) {
        if (calls.size() != preds.size())
            throw DataError("comparator '" + name + "' length mismatch");
        ConfusionCounts c;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (calls[i])
                (preds.labels[i] == 1 ? c.tp : c.fp)++;
            else
                (preds.labels[i] == 1 ? c.fn : c.tn)++;
        }
        test_counts[name] = c;
        curve.comparators[name] = {};
    }

    for (double t : curve.thresholds) {
        const double odds = t / (1.0 - t);
        curve.nb_model.push_back(net_benefit(preds, t));
        curve.nb_treat_all.push_back(prevalence - (1.0 - prevalence) * odds);
        curve.nb_treat_none.push_back(0.0);
        for (const auto& [name, c] : test_counts)
            curve.comparators[name].push_back(
                static_cast<double>(c.tp) / n -
                static_cast<double>(c.fp) / n * odds);
    }
    return curve;
}

}  // namespace clinaudit
