#pragma once

// Discrimination metrics, the hold-out error bound, and paired statistical
// tests over per-fold metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "clinaudit/errors.hpp"
#include "clinaudit/rng.hpp"

namespace clinaudit {

// Aligned (true label, predicted class-1 probability, optional group id).
struct PredictionSet {
    std::vector<int> labels;
    std::vector<double> probs;
    std::vector<int> group;  // empty when absent

    std::size_t size() const { return labels.size(); }
    bool has_group() const { return !group.empty(); }

    void validate() const {
        if (labels.empty()) throw DataError("empty prediction set");
        if (probs.size() != labels.size())
            throw DataError("labels/probs length mismatch");
        if (!group.empty() && group.size() != labels.size())
            throw DataError("group length mismatch");
    }

    bool both_classes() const {
        bool pos = false, neg = false;
        for (int y : labels) (y == 1 ? pos : neg) = true;
        return pos && neg;
    }
};

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

// Classify positive iff p >= threshold.
inline ConfusionCounts confusion(const PredictionSet& preds, double threshold) {
    preds.validate();
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool hat = preds.probs[i] >= threshold;
        if (preds.labels[i] == 1)
            (hat ? c.tp : c.fn)++;
        else
            (hat ? c.fp : c.tn)++;
    }
    return c;
}

// Ratios with zero denominators are reported as nullopt, never silent 0.
struct ClassificationMetrics {
    std::optional<double> accuracy, sensitivity, specificity, precision, f1;
};

inline ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    ClassificationMetrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.sensitivity = ratio(c.tp, c.tp + c.fn);
    m.specificity = ratio(c.tn, c.tn + c.fp);
    m.precision = ratio(c.tp, c.tp + c.fp);
    if (m.precision && m.sensitivity && (*m.precision + *m.sensitivity) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.sensitivity /
               (*m.precision + *m.sensitivity);
    return m;
}

struct RocCurve {
    std::vector<double> thresholds;  // descending, one per distinct score step
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0.0;
};

// Ties are grouped into a single threshold step; trapezoidal AUC then equals
// the Mann-Whitney statistic with half credit for ties.
inline RocCurve roc_auc(const PredictionSet& preds) {
    preds.validate();
    if (!preds.both_classes())
        throw DataError("ROC requires both classes present");

    std::vector<std::size_t> idx(preds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return preds.probs[a] > preds.probs[b];
    });

    double n_pos = 0, n_neg = 0;
    for (int y : preds.labels) (y == 1 ? n_pos : n_neg) += 1.0;

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);

    double tp = 0, fp = 0, auc = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double score = preds.probs[idx[i]];
        double dtp = 0, dfp = 0;
        while (i < idx.size() && preds.probs[idx[i]] == score) {
            (preds.labels[idx[i]] == 1 ? dtp : dfp) += 1.0;
            ++i;
        }
        // Trapezoid over the tie block.
        auc += dfp / n_neg * (tp + 0.5 * dtp) / n_pos;
        tp += dtp;
        fp += dfp;
        curve.thresholds.push_back(score);
        curve.fpr.push_back(fp / n_neg);
        curve.tpr.push_back(tp / n_pos);
    }
    curve.auc = auc;
    return curve;
}

enum class LossKind { ZeroOne, LogLoss };

inline double empirical_risk(const PredictionSet& preds, LossKind loss) {
    preds.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (loss == LossKind::ZeroOne) {
            const int hat = preds.probs[i] >= 0.5 ? 1 : 0;
            total += hat != preds.labels[i] ? 1.0 : 0.0;
        } else {
            const double p =
                std::clamp(preds.probs[i], 1e-12, 1.0 - 1e-12);
            total += preds.labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
        }
    }
    return total / static_cast<double>(preds.size());
}

// E = sqrt(ln(2/delta) / (2 m')); decreasing in both arguments.
inline double holdout_error_bound(std::size_t m_prime, double delta) {
    if (m_prime < 1) throw DataError("m' must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must be in (0,1)");
    return std::sqrt(std::log(2.0 / delta) /
                     (2.0 * static_cast<double>(m_prime)));
}

// ---------------------------------------------------------------------------
// Paired tests.

namespace detail {

// Regularized incomplete beta via Lentz continued fraction; good to ~1e-10.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                            std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

inline double t_two_sided_p(double t, double df) {
    return incbeta(0.5 * df, 0.5, df / (df + t * t));
}

}  // namespace detail

enum class PairedTest { TTest, Wilcoxon };

struct TestResult {
    double statistic = 0.0;  // t, or W+ for the signed-rank test
    double p_two_sided = 1.0;
    bool exact = false;  // Wilcoxon p from full sign enumeration
};

inline TestResult paired_ttest(const std::vector<double>& diffs) {
    const std::size_t n = diffs.size();
    if (n < 2) throw DataError("paired t-test needs >= 2 pairs");
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double var = ss / static_cast<double>(n - 1);
    if (var == 0.0)
        throw NumericError("degenerate paired t-test: zero-variance differences");
    TestResult r;
    r.statistic = mean / std::sqrt(var / static_cast<double>(n));
    r.p_two_sided =
        detail::t_two_sided_p(r.statistic, static_cast<double>(n - 1));
    return r;
}

// Exact signed-rank test for <= 20 non-zero differences (full 2^m sign
// enumeration), normal approximation beyond. Zero differences are dropped
// before ranking.
inline TestResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
    std::vector<double> d;
    for (double x : diffs)
        if (x != 0.0) d.push_back(x);
    const std::size_t m = d.size();
    if (m == 0) return {0.0, 1.0, true};  // no evidence

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(d[a]) < std::fabs(d[b]);
    });
    std::vector<double> rank(m);
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        while (j < m &&
               std::fabs(d[order[j]]) == std::fabs(d[order[i]]))
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
        for (std::size_t s = i; s < j; ++s) rank[order[s]] = avg;
        i = j;
    }

    double w_plus = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (d[i] > 0.0) w_plus += rank[i];

    TestResult r;
    r.statistic = w_plus;
    if (m <= 20) {
        const std::uint64_t total = 1ULL << m;
        std::uint64_t le = 0, ge = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            double w = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                if (mask & (1ULL << i)) w += rank[i];
            if (w <= w_plus + 1e-9) ++le;
            if (w >= w_plus - 1e-9) ++ge;
        }
        const double tail =
            static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
        r.p_two_sided = std::min(1.0, 2.0 * tail);
        r.exact = true;
    } else {
        const double n = static_cast<double>(m);
        const double mean = n * (n + 1.0) / 4.0;
        double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
        // Tie correction.
        for (std::size_t i = 0; i < m;) {
            std::size_t j = i;
            while (j < m &&
                   std::fabs(d[order[j]]) == std::fabs(d[order[i]]))
                ++j;
            const double t = static_cast<double>(j - i);
            var -= t * (t * t - 1.0) / 48.0;
            i = j;
        }
        const double z = (w_plus - mean) / std::sqrt(var);
        r.p_two_sided = std::erfc(std::fabs(z) / std::sqrt(2.0));
    }
    return r;
}

inline TestResult compare_paired(const std::vector<double>& a,
                                 const std::vector<double>& b,
                                 PairedTest method) {
    if (a.size() != b.size()) throw DataError("paired sequences differ in length");
    std::vector<double> diffs(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
    return method == PairedTest::TTest ? paired_ttest(diffs)
                                       : wilcoxon_signed_rank(diffs);
}

// ---------------------------------------------------------------------------
// Percentile bootstrap.

using MetricFn = std::function<double(const PredictionSet&)>;

inline std::pair<double, double> bootstrap_ci(const PredictionSet& preds,
                                              const MetricFn& metric,
                                              std::size_t n_boot, double level,
                                              std::uint64_t seed) {
    preds.validate();
    if (preds.size() < 10) throw DataError("bootstrap needs n >= 10");
    if (!(level > 0.0 && level < 1.0)) throw DataError("level must be in (0,1)");

    Rng rng(seed);
    std::vector<double> stats;
    stats.reserve(n_boot);
    constexpr std::size_t kRetryCap = 1000;
    std::size_t retries = 0;
    while (stats.size() < n_boot) {
        PredictionSet s;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const std::size_t j = rng.uniform_index(preds.size());
            s.labels.push_back(preds.labels[j]);
            s.probs.push_back(preds.probs[j]);
            if (preds.has_group()) s.group.push_back(preds.group[j]);
        }
        if (!s.both_classes()) {
            // Degenerate resample: redraw, with a cap.
            if (++retries > kRetryCap)
                throw NumericError("bootstrap retry cap exceeded "
                                   "(resamples keep collapsing to one class)");
            continue;
        }
        stats.push_back(metric(s));
    }
    std::sort(stats.begin(), stats.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(stats.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    const double alpha = 1.0 - level;
    return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

}  // namespace clinaudit
