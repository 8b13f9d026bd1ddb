#pragma once

// Group-conditional metrics: statistical parity, the independence /
// separation / sufficiency criteria, and subgroup calibration bias.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clinaudit/calibration.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"

namespace clinaudit {

namespace detail {

inline std::vector<int> group_ids(const PredictionSet& preds) {
    if (!preds.has_group()) throw DataError("prediction set has no group attribute");
    std::vector<int> ids = preds.group;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

inline PredictionSet group_subset(const PredictionSet& preds, int g) {
    PredictionSet out;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds.group[i] != g) continue;
        out.labels.push_back(preds.labels[i]);
        out.probs.push_back(preds.probs[i]);
    }
    return out;
}

inline double max_pairwise_gap(const std::vector<double>& values) {
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

}  // namespace detail

// Max over group pairs of |positive-classification rate difference| at the
// given threshold.
inline double statistical_parity_difference(const PredictionSet& preds,
                                            double threshold) {
    preds.validate();
    const auto ids = detail::group_ids(preds);
    if (ids.size() < 2) throw DataError("need at least 2 groups");
    std::vector<double> rates;
    for (int g : ids) {
        const auto sub = detail::group_subset(preds, g);
        if (sub.size() == 0) throw DataError("empty group");
        double pos = 0.0;
        for (double p : sub.probs) pos += p >= threshold ? 1.0 : 0.0;
        rates.push_back(pos / static_cast<double>(sub.size()));
    }
    return detail::max_pairwise_gap(rates);
}

struct FairnessCriteria {
    double independence_gap = 0.0;  // max pairwise |mean score| difference
    double separation_gap = 0.0;    // max over y in {0,1} of TPR/FPR gaps
    double sufficiency_gap = 0.0;   // max over occupied score bins
    // Groups where a separation component could not be computed (class absent).
    std::vector<std::string> undefined_components;
};

inline FairnessCriteria fairness_criteria(const PredictionSet& preds,
                                          double threshold,
                                          std::size_t score_bins = 10) {
    preds.validate();
    const auto ids = detail::group_ids(preds);
    if (ids.size() < 2) throw DataError("need at least 2 groups");

    FairnessCriteria out;

    // Independence: score means per group.
    std::vector<double> means;
    for (int g : ids) {
        const auto sub = detail::group_subset(preds, g);
        if (sub.size() == 0) throw DataError("empty group");
        double sum = 0.0;
        for (double p : sub.probs) sum += p;
        means.push_back(sum / static_cast<double>(sub.size()));
    }
    out.independence_gap = detail::max_pairwise_gap(means);

    // Separation: TPR and FPR per group at the threshold.
    std::vector<double> tprs, fprs;
    for (int g : ids) {
        const auto sub = detail::group_subset(preds, g);
        const auto c = confusion(sub, threshold);
        if (c.tp + c.fn == 0)
            out.undefined_components.push_back(
                "group " + std::to_string(g) + ": TPR undefined (no positives)");
        else
            tprs.push_back(static_cast<double>(c.tp) /
                           static_cast<double>(c.tp + c.fn));
        if (c.fp + c.tn == 0)
            out.undefined_components.push_back(
                "group " + std::to_string(g) + ": FPR undefined (no negatives)");
        else
            fprs.push_back(static_cast<double>(c.fp) /
                           static_cast<double>(c.fp + c.tn));
    }
    double sep = 0.0;
    if (tprs.size() >= 2) sep = std::max(sep, detail::max_pairwise_gap(tprs));
    if (fprs.size() >= 2) sep = std::max(sep, detail::max_pairwise_gap(fprs));
    out.separation_gap = sep;

    // Sufficiency: P(y=1 | score bin, group), equal-width bins shared with
    // the calibration module.
    double suff = 0.0;
    for (std::size_t b = 0; b < score_bins; ++b) {
        const double lo = static_cast<double>(b) / score_bins;
        const double hi = static_cast<double>(b + 1) / score_bins;
        std::vector<double> rates;
        for (int g : ids) {
            double pos = 0.0, cnt = 0.0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                if (preds.group[i] != g) continue;
                const double p = preds.probs[i];
                const bool inside =
                    p >= lo && (p < hi || (b + 1 == score_bins && p <= hi));
                if (!inside) continue;
                cnt += 1.0;
                pos += preds.labels[i];
            }
            if (cnt > 0.0) rates.push_back(pos / cnt);
        }
        if (rates.size() >= 2)
            suff = std::max(suff, detail::max_pairwise_gap(rates));
    }
    out.sufficiency_gap = suff;
    return out;
}

struct GroupCalibration {
    int group = 0;
    std::optional<double> alpha, beta;
    double ece = 0.0;
    std::string error;  // non-empty when the logistic refit failed
};

inline std::vector<GroupCalibration> subgroup_calibration(
    const PredictionSet& preds, std::size_t n_bins = 10,
    Binning binning = Binning::EqualWidth) {
    preds.validate();
    const auto ids = detail::group_ids(preds);
    std::vector<GroupCalibration> out;
    for (int g : ids) {
        const auto sub = detail::group_subset(preds, g);
        GroupCalibration gc;
        gc.group = g;
        gc.ece = ece(sub, std::min<std::size_t>(n_bins, sub.size()), binning);
        try {
            const auto ab = intercept_slope(sub);
            gc.alpha = ab.first;
            gc.beta = ab.second;
        } catch (const std::exception& e) {
            gc.error = "group " + std::to_string(g) + ": " + e.what();
        }
        out.push_back(std::move(gc));
    }
    return out;
}

struct FairnessReport {
    std::vector<int> groups;
    std::vector<ConfusionCounts> per_group_counts;
    double spd = 0.0;
    FairnessCriteria criteria;
    std::vector<GroupCalibration> calibration;
};

inline FairnessReport fairness_report(const PredictionSet& preds,
                                      double threshold,
                                      std::size_t score_bins = 10) {
    FairnessReport rep;
    rep.groups = detail::group_ids(preds);
    for (int g : rep.groups)
        rep.per_group_counts.push_back(
            confusion(detail::group_subset(preds, g), threshold));
    rep.spd = statistical_parity_difference(preds, threshold);
    rep.criteria = fairness_criteria(preds, threshold, score_bins);
    rep.calibration = subgroup_calibration(preds, score_bins);
    return rep;
}

}  // namespace clinaudit
