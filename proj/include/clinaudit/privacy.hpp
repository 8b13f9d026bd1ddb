#pragma once

// Differential privacy: Laplace and Gaussian mechanisms, DP-SGD training
// with per-example clipping and Gaussian gradient noise, and basic
// composition accounting.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "clinaudit/errors.hpp"
#include "clinaudit/model.hpp"
#include "clinaudit/rng.hpp"

#include "json.hpp"

namespace clinaudit {

struct PrivacySpec {
    double epsilon = 1.0;      // > 0
    double delta = 0.0;        // in [0,1); 0 marks pure epsilon-DP
    double sensitivity = 1.0;  // mechanism sensitivity, > 0
    double clip_norm = 1.0;    // DP-SGD clip C, > 0
    double noise_scale = 0.0;  // DP-SGD sigma, >= 0
};

inline void check_mechanism_spec(double sensitivity, double epsilon) {
    if (!(sensitivity > 0.0)) throw DataError("sensitivity must be > 0");
    if (!(epsilon > 0.0)) throw DataError("epsilon must be > 0");
}

// Additive Laplace noise with scale b = sensitivity / epsilon per coordinate.
inline std::vector<double> laplace_mechanism(const std::vector<double>& values,
                                             double sensitivity, double epsilon,
                                             std::uint64_t seed) {
    check_mechanism_spec(sensitivity, epsilon);
    Rng rng(seed);
    const double scale = sensitivity / epsilon;
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("non-finite input value");
        out.push_back(v + rng.laplace(scale));
    }
    return out;
}

// Classic Gaussian mechanism: sigma = sensitivity * sqrt(2 ln(1.25/delta)) /
// epsilon; requires epsilon in (0,1) and delta > 0.
inline double gaussian_sigma(double sensitivity, double epsilon, double delta) {
    check_mechanism_spec(sensitivity, epsilon);
    if (delta <= 0.0)
        throw DataError("Gaussian mechanism requires delta > 0 "
                        "(it cannot give pure epsilon-DP)");
    if (epsilon >= 1.0)
        throw DataError("classic Gaussian bound requires epsilon in (0,1)");
    return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

inline std::vector<double> gaussian_mechanism(const std::vector<double>& values,
                                              double sensitivity, double epsilon,
                                              double delta, std::uint64_t seed) {
    const double sigma = gaussian_sigma(sensitivity, epsilon, delta);
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("non-finite input value");
        out.push_back(v + sigma * rng.normal());
    }
    return out;
}

struct DpSgdResult {
    Model model;
    std::vector<SgdStepRecord> audit;
};

// Per-example gradients clipped to norm <= C, batch-averaged, Gaussian noise
// N(0, sigma^2 C^2 I) added to the mean, then a plain SGD update. With
// sigma = 0 and C at least every gradient norm this reduces exactly to SGD.
inline DpSgdResult dp_sgd_train(const Dataset& ds, const Architecture& arch,
                                const TrainConfig& cfg, const PrivacySpec& priv) {
    if (!(priv.clip_norm > 0.0)) throw DataError("clip norm must be > 0");
    if (priv.noise_scale < 0.0) throw DataError("noise scale must be >= 0");
    DpSgdResult result;
    result.model = sgd_train(ds, arch, cfg, priv.clip_norm, priv.noise_scale,
                             &result.audit);
    return result;
}

// Basic composition: epsilons and deltas add. A loose upper bound; no
// moments accountant is implemented.
inline std::pair<double, double> compose_privacy(
    const std::vector<std::pair<double, double>>& steps) {
    if (steps.empty()) throw DataError("empty composition list");
    double eps = 0.0, delta = 0.0;
    for (const auto& [e, d] : steps) {
        eps += e;
        delta += d;
    }
    return {eps, delta};
}

// Audit log as JSON-lines: step, max_raw_norm, max_clipped_norm,
// noise_scale, loss.
inline void write_audit_log(const std::vector<SgdStepRecord>& audit,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open audit log " + path);
    for (const auto& rec : audit) {
        nlohmann::json j = {{"step", rec.step},
                            {"max_raw_norm", rec.max_raw_norm},
                            {"max_clipped_norm", rec.max_clipped_norm},
                            {"noise_scale", rec.noise_scale},
                            {"loss", rec.loss}};
        out << j.dump() << "\n";
    }
}

}  // namespace clinaudit
