#pragma once

// Structured, serializable run reports and CSV curve export.

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "clinaudit/calibration.hpp"
#include "clinaudit/dca.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"

#include "json.hpp"

namespace clinaudit {

inline constexpr int kReportSchemaVersion = 1;

struct EvaluationReport {
    nlohmann::json config;  // full run config echo, including the seed
    std::uint64_t seed = 0;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> curve_files;  // name -> path
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema_version"] = kReportSchemaVersion;
        j["config"] = config;
        j["seed"] = seed;
        j["scalars"] = scalars;
        j["curve_files"] = curve_files;
        j["warnings"] = warnings;
        return j;
    }

    static EvaluationReport from_json(const nlohmann::json& j) {
        if (j.at("schema_version").get<int>() != kReportSchemaVersion)
            throw DataError("unsupported report schema version");
        EvaluationReport r;
        r.config = j.at("config");
        r.seed = j.at("seed").get<std::uint64_t>();
        r.scalars = j.at("scalars").get<std::map<std::string, double>>();
        r.curve_files =
            j.at("curve_files").get<std::map<std::string, std::string>>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    }
};

namespace detail {

// Shortest round-trippable representation, so curve CSVs parse back exactly.
inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    const std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << (c ? "," : "") << detail::fmt(columns[c][r]);
        out << "\n";
    }
}

inline void write_roc_csv(const RocCurve& curve, const std::string& path) {
    write_csv(path, {"threshold", "fpr", "tpr"},
              {curve.thresholds, curve.fpr, curve.tpr});
}

inline void write_calibration_csv(const std::vector<CalibrationBin>& bins,
                                  const std::string& path) {
    std::vector<double> center, pred, obs, count;
    for (const auto& b : bins) {
        center.push_back(0.5 * (b.lo + b.hi));
        pred.push_back(b.mean_predicted);
        obs.push_back(b.observed_rate);
        count.push_back(static_cast<double>(b.count));
    }
    write_csv(path, {"bin_center", "mean_predicted", "observed", "count"},
              {center, pred, obs, count});
}

inline void write_decision_curve_csv(const DecisionCurve& curve,
                                     const std::string& path) {
    std::vector<std::string> header = {"threshold", "nb_model", "nb_all",
                                       "nb_none"};
    std::vector<std::vector<double>> cols = {curve.thresholds, curve.nb_model,
                                             curve.nb_treat_all,
                                             curve.nb_treat_none};
    for (const auto& [name, values] : curve.comparators) {
        header.push_back(name);
        cols.push_back(values);
    }
    write_csv(path, header, cols);
}

inline void write_attribution_csv(const std::vector<std::string>& names,
                                  const std::vector<double>& values,
                                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path);
    out << "feature,value\n";
    for (std::size_t j = 0; j < values.size(); ++j)
        out << (j < names.size() ? names[j] : "x" + std::to_string(j)) << ","
            << detail::fmt(values[j]) << "\n";
}

}  // namespace clinaudit
