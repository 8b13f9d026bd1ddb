#pragma once

// Calibration curves, calibration-in-the-large (alpha), calibration slope
// (beta), ECE with fixed or adaptive binning, and logistic recalibration.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"

namespace clinaudit {

enum class Binning { EqualWidth, EqualFrequency };

struct CalibrationBin {
    double lo = 0.0, hi = 1.0;
    double mean_predicted = 0.0;
    double observed_rate = 0.0;
    std::size_t count = 0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double alpha = 0.0;  // calibration-in-the-large
    double beta = 1.0;   // calibration slope
    double ece = 0.0;
    Binning binning = Binning::EqualWidth;
    std::vector<std::string> warnings;
};

inline double logit(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
}

inline std::vector<CalibrationBin> calibration_curve(const PredictionSet& preds,
                                                     std::size_t n_bins,
                                                     Binning binning) {
    preds.validate();
    if (n_bins < 1) throw DataError("n_bins must be >= 1");
    if (preds.size() < n_bins) throw DataError("need n >= n_bins");

    std::vector<CalibrationBin> bins(n_bins);
    std::vector<std::vector<std::size_t>> members(n_bins);

    if (binning == Binning::EqualWidth) {
        for (std::size_t b = 0; b < n_bins; ++b) {
            bins[b].lo = static_cast<double>(b) / n_bins;
            bins[b].hi = static_cast<double>(b + 1) / n_bins;
        }
        for (std::size_t i = 0; i < preds.size(); ++i) {
            auto b = static_cast<std::size_t>(preds.probs[i] *
                                              static_cast<double>(n_bins));
            b = std::min(b, n_bins - 1);  // p = 1.0 lands in the last bin
            members[b].push_back(i);
        }
    } else {
        // Sort by score and cut into n_bins chunks with sizes within 1.
        std::vector<std::size_t> idx(preds.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) {
                             return preds.probs[a] < preds.probs[b];
                         });
        const std::size_t base = preds.size() / n_bins;
        const std::size_t extra = preds.size() % n_bins;
        std::size_t pos = 0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            const std::size_t size = base + (b < extra ? 1 : 0);
            bins[b].lo = preds.probs[idx[pos]];
            for (std::size_t s = 0; s < size; ++s) members[b].push_back(idx[pos++]);
            bins[b].hi = preds.probs[idx[pos - 1]];
        }
    }

    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].count = members[b].size();
        if (members[b].empty()) continue;
        double psum = 0.0, ysum = 0.0;
        for (std::size_t i : members[b]) {
            psum += preds.probs[i];
            ysum += preds.labels[i];
        }
        bins[b].mean_predicted = psum / static_cast<double>(members[b].size());
        bins[b].observed_rate = ysum / static_cast<double>(members[b].size());
    }
    return bins;
}

// ece = sum_k (|B_k|/n) * |observed(B_k) - mean_pred(B_k)|, confidence
// taken as the class-1 probability.
inline double ece(const PredictionSet& preds, std::size_t n_bins,
                  Binning binning) {
    const auto bins = calibration_curve(preds, n_bins, binning);
    double total = 0.0;
    for (const auto& b : bins)
        total += static_cast<double>(b.count) / preds.size() *
                 std::fabs(b.observed_rate - b.mean_predicted);
    return total;
}

namespace detail {

// Damped Newton fit of y ~ sigmoid(a + b*t); fit_slope=false freezes b=1
// (offset form used for calibration-in-the-large).
inline std::pair<double, double> logistic_refit(const std::vector<double>& t,
                                                const std::vector<int>& y,
                                                bool fit_slope) {
    constexpr double kTol = 1e-10;
    constexpr int kMaxIter = 100;

    const std::size_t n = t.size();
    double tmin = t[0], tmax = t[0];
    for (double v : t) {
        tmin = std::min(tmin, v);
        tmax = std::max(tmax, v);
    }
    if (fit_slope && tmax - tmin < 1e-12)
        throw NumericError("non-identifiable slope: constant predictions");

    double a = 0.0, b = 1.0;
    auto nll = [&](double aa, double bb) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = aa + bb * t[i];
            // log(1 + e^z) - y z, stable form
            total += (z > 0.0 ? z + std::log1p(std::exp(-z))
                              : std::log1p(std::exp(z))) -
                     y[i] * z;
        }
        return total;
    };

    double cur = nll(a, b);
    for (int iter = 0; iter < kMaxIter; ++iter) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(a + b * t[i]);
            const double r = p - y[i], w = p * (1.0 - p);
            g0 += r;
            h00 += w;
            if (fit_slope) {
                g1 += r * t[i];
                h01 += w * t[i];
                h11 += w * t[i] * t[i];
            }
        }
        double da, db = 0.0;
        if (fit_slope) {
            const double det = h00 * h11 - h01 * h01;
            if (std::fabs(det) < 1e-300)
                throw NumericError("singular Hessian in logistic refit");
            da = -(h11 * g0 - h01 * g1) / det;
            db = -(h00 * g1 - h01 * g0) / det;
        } else {
            if (h00 < 1e-300)
                throw NumericError("degenerate offset fit");
            da = -g0 / h00;
        }

        // Damping: halve until the objective does not increase.
        double scale = 1.0;
        double na = a, nb = b, next = cur;
        for (int half = 0; half < 50; ++half) {
            na = a + scale * da;
            nb = b + scale * db;
            next = nll(na, nb);
            if (next <= cur + 1e-15) break;
            scale *= 0.5;
        }
        const double move = std::fabs(na - a) + std::fabs(nb - b);
        a = na;
        b = nb;
        cur = next;
        if (std::fabs(a) > 50.0 || std::fabs(b) > 50.0)
            throw NumericError(
                "logistic refit diverged (perfectly separating logits)");
        if (move < kTol) break;
    }
    return {a, b};
}

}  // namespace detail

// alpha from the offset fit (slope fixed at 1), beta from the free-slope fit
// of y on logit(p-hat).
inline std::pair<double, double> intercept_slope(const PredictionSet& preds) {
    preds.validate();
    if (!preds.both_classes())
        throw DataError("intercept/slope require both classes");
    std::vector<double> t(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) t[i] = logit(preds.probs[i]);
    const auto offset = detail::logistic_refit(t, preds.labels, false);
    const auto slope = detail::logistic_refit(t, preds.labels, true);
    return {offset.first, slope.second};
}

// Logistic map in logit space, fitted on a held-out set and applicable to
// any later predictions from the same model.
struct RecalibrationMap {
    double intercept = 0.0;
    double slope = 1.0;

    double apply(double p) const {
        return sigmoid(intercept + slope * logit(p));
    }

    PredictionSet apply(const PredictionSet& preds) const {
        PredictionSet out = preds;
        for (double& p : out.probs) p = apply(p);
        return out;
    }
};

inline RecalibrationMap recalibrate(const PredictionSet& holdout) {
    holdout.validate();
    if (!holdout.both_classes())
        throw DataError("recalibration requires both classes");
    std::vector<double> t(holdout.size());
    for (std::size_t i = 0; i < holdout.size(); ++i)
        t[i] = logit(holdout.probs[i]);
    const auto fit = detail::logistic_refit(t, holdout.labels, true);
    return {fit.first, fit.second};
}

// Sample-size rule of thumb for calibration assessment; surfaced as a
// warning, never enforced.
inline constexpr std::size_t kCalibrationEventRule = 200;

inline CalibrationReport calibration_report(const PredictionSet& preds,
                                            std::size_t n_bins = 10,
                                            Binning binning = Binning::EqualWidth) {
    CalibrationReport rep;
    rep.binning = binning;
    rep.bins = calibration_curve(preds, n_bins, binning);
    rep.ece = ece(preds, n_bins, binning);
    const auto ab = intercept_slope(preds);
    rep.alpha = ab.first;
    rep.beta = ab.second;
    std::size_t events = 0;
    for (int y : preds.labels) events += static_cast<std::size_t>(y);
    const std::size_t nonevents = preds.size() - events;
    if (events < kCalibrationEventRule || nonevents < kCalibrationEventRule)
        rep.warnings.push_back(
            "fewer than 200 events or non-events; calibration estimates "
            "may be unstable");
    return rep;
}

}  // namespace clinaudit
