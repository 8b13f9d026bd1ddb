#pragma once

// Dataset representation, CSV ingestion, split/fold plans and synthetic
// generation. Everything here is deterministic given (inputs, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "clinaudit/errors.hpp"
#include "clinaudit/rng.hpp"

namespace clinaudit {

struct Dataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> features;  // row-major, n * d
    std::vector<int> labels;       // 0/1
    std::vector<int> group;        // empty when absent, else length n
    std::vector<std::string> feature_names;
    std::vector<std::string> warnings;

    bool has_group() const { return !group.empty(); }

    double at(std::size_t i, std::size_t j) const { return features[i * d + j]; }

    const double* row(std::size_t i) const { return features.data() + i * d; }

    std::size_t positives() const {
        std::size_t c = 0;
        for (int y : labels) c += static_cast<std::size_t>(y);
        return c;
    }

    bool single_class() const {
        const std::size_t p = positives();
        return p == 0 || p == n;
    }

    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.n = idx.size();
        out.d = d;
        out.feature_names = feature_names;
        out.features.reserve(out.n * d);
        out.labels.reserve(out.n);
        for (std::size_t i : idx) {
            out.features.insert(out.features.end(), row(i), row(i) + d);
            out.labels.push_back(labels[i]);
            if (has_group()) out.group.push_back(group[i]);
        }
        return out;
    }
};

struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // fold id per row, in [0, k)
    bool stratified = false;
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }
};

enum class ImputePolicy { Error, Mean };

struct CsvOptions {
    std::string label_column = "label";
    std::string group_column = "group";
    ImputePolicy impute = ImputePolicy::Error;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// CSV: UTF-8, header row, `label` column required, `group` optional, all
// other columns numeric features; empty string = missing.
inline Dataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path);
    const auto header = detail::split_csv_line(line);

    std::ptrdiff_t label_col = -1, group_col = -1;
    std::vector<std::size_t> feature_cols;
    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = detail::trim(header[c]);
        if (name == opt.label_column) {
            label_col = static_cast<std::ptrdiff_t>(c);
        } else if (name == opt.group_column) {
            group_col = static_cast<std::ptrdiff_t>(c);
        } else {
            feature_cols.push_back(c);
            ds.feature_names.push_back(name);
        }
    }
    if (label_col < 0)
        throw DataError("missing label column '" + opt.label_column + "'");

    ds.d = feature_cols.size();
    std::vector<std::vector<bool>> missing_rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));

        const std::string ytxt = detail::trim(cells[label_col]);
        if (ytxt != "0" && ytxt != "1")
            throw DataError("row " + std::to_string(row_no) +
                            ": non-binary label '" + ytxt + "'");
        ds.labels.push_back(ytxt == "1" ? 1 : 0);

        if (group_col >= 0) {
            const std::string gtxt = detail::trim(cells[group_col]);
            try {
                ds.group.push_back(std::stoi(gtxt));
            } catch (...) {
                throw DataError("row " + std::to_string(row_no) +
                                ": bad group id '" + gtxt + "'");
            }
        }

        std::vector<bool> miss(ds.d, false);
        for (std::size_t j = 0; j < ds.d; ++j) {
            const std::string cell = detail::trim(cells[feature_cols[j]]);
            if (cell.empty()) {
                if (opt.impute == ImputePolicy::Error)
                    throw DataError("row " + std::to_string(row_no) +
                                    ": empty cell in column '" +
                                    ds.feature_names[j] + "'");
                miss[j] = true;
                ds.features.push_back(0.0);
                continue;
            }
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                if (pos != cell.size() || !std::isfinite(v))
                    throw std::invalid_argument(cell);
                ds.features.push_back(v);
            } catch (...) {
                throw DataError("row " + std::to_string(row_no) +
                                ": non-numeric cell '" + cell + "' in column '" +
                                ds.feature_names[j] + "'");
            }
        }
        missing_rows.push_back(std::move(miss));
    }
    ds.n = ds.labels.size();
    if (ds.n == 0) throw DataError("no data rows in " + path);

    if (opt.impute == ImputePolicy::Mean) {
        for (std::size_t j = 0; j < ds.d; ++j) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < ds.n; ++i) {
                if (!missing_rows[i][j]) {
                    sum += ds.at(i, j);
                    ++cnt;
                }
            }
            if (cnt == 0)
                throw DataError("column '" + ds.feature_names[j] +
                                "' is entirely missing");
            const double mean = sum / static_cast<double>(cnt);
            for (std::size_t i = 0; i < ds.n; ++i)
                if (missing_rows[i][j]) ds.features[i * ds.d + j] = mean;
        }
    }

    if (ds.single_class())
        ds.warnings.push_back("label column contains a single class; "
                              "trainers will reject this dataset");
    return ds;
}

// Deterministic hold-out split. Returned index sets are disjoint and cover
// all rows.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& ds,
                                                 double train_fraction,
                                                 bool stratified,
                                                 std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("train_fraction must be in (0,1)");
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;

    auto deal = [&](std::vector<std::size_t>& members) {
        rng.shuffle(members);
        std::size_t n_train = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? train_idx : test_idx).push_back(members[i]);
    };

    if (stratified) {
        for (int cls : {0, 1}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < ds.n; ++i)
                if (ds.labels[i] == cls) members.push_back(i);
            if (members.size() < 2)
                throw DataError("stratified split impossible: class " +
                                std::to_string(cls) + " has fewer than 2 rows");
            deal(members);
        }
    } else {
        if (ds.n < 2) throw DataError("need at least 2 rows to split");
        std::vector<std::size_t> all(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) all[i] = i;
        deal(all);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {ds.subset(train_idx), ds.subset(test_idx)};
}

enum class FoldMode { Plain, Stratified, Loocv };

inline FoldPlan make_folds(const Dataset& ds, std::size_t k, FoldMode mode,
                           std::uint64_t seed) {
    if (mode == FoldMode::Loocv) k = ds.n;
    if (k < 2 || k > ds.n)
        throw DataError("k must satisfy 2 <= k <= n (got k=" +
                        std::to_string(k) + ", n=" + std::to_string(ds.n) + ")");

    FoldPlan plan;
    plan.k = k;
    plan.stratified = (mode == FoldMode::Stratified);
    plan.seed = seed;
    plan.assignments.assign(ds.n, 0);

    Rng rng(seed);
    if (mode == FoldMode::Loocv) {
        for (std::size_t i = 0; i < ds.n; ++i) plan.assignments[i] = i;
        return plan;
    }

    if (mode == FoldMode::Stratified) {
        // Deal each class round-robin; the fold cursor carries across classes
        // so total fold sizes stay balanced too.
        std::size_t cursor = 0;
        for (int cls : {1, 0}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < ds.n; ++i)
                if (ds.labels[i] == cls) members.push_back(i);
            rng.shuffle(members);
            for (std::size_t m : members) {
                plan.assignments[m] = cursor % k;
                ++cursor;
            }
        }
    } else {
        auto idx = shuffled_indices(ds.n, rng);
        // First (n mod k) folds take the extra row.
        const std::size_t base = ds.n / k, extra = ds.n % k;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t size = base + (f < extra ? 1 : 0);
            for (std::size_t s = 0; s < size; ++s)
                plan.assignments[idx[pos++]] = f;
        }
    }
    return plan;
}

struct GroupShift {
    double feature_offset = 0.0;  // added to every feature of the group
    double logit_offset = 0.0;    // added to the label logit
};

struct SyntheticSpec {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> true_weights;
    double intercept = 0.0;
    std::vector<GroupShift> group_shift;  // empty = no group attribute
    double noise = 0.0;                   // sd of extra logit noise
    std::uint64_t seed = 0;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Features ~ N(0,1) (+ per-group offset); labels ~ Bernoulli(sigmoid(w.x +
// intercept + group logit offset + noise)). Identical spec => identical data.
inline Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.d != spec.true_weights.size())
        throw DataError("true_weights length must equal d");
    if (!std::isfinite(spec.intercept) || !std::isfinite(spec.noise))
        throw DataError("non-finite synthetic spec values");
    for (double w : spec.true_weights)
        if (!std::isfinite(w)) throw DataError("non-finite true weight");

    Rng rng(spec.seed);
    Dataset ds;
    ds.n = spec.n;
    ds.d = spec.d;
    ds.features.reserve(spec.n * spec.d);
    ds.labels.reserve(spec.n);
    for (std::size_t j = 0; j < spec.d; ++j)
        ds.feature_names.push_back("x" + std::to_string(j));

    const std::size_t n_groups = spec.group_shift.size();
    for (std::size_t i = 0; i < spec.n; ++i) {
        GroupShift shift;
        if (n_groups > 0) {
            const int g = static_cast<int>(rng.uniform_index(n_groups));
            ds.group.push_back(g);
            shift = spec.group_shift[g];
        }
        double z = spec.intercept + shift.logit_offset;
        for (std::size_t j = 0; j < spec.d; ++j) {
            const double x = rng.normal() + shift.feature_offset;
            ds.features.push_back(x);
            z += spec.true_weights[j] * x;
        }
        if (spec.noise > 0.0) z += spec.noise * rng.normal();
        ds.labels.push_back(rng.uniform() < sigmoid(z) ? 1 : 0);
    }
    if (ds.n > 0 && ds.single_class())
        ds.warnings.push_back("synthetic dataset is single-class");
    return ds;
}

}  // namespace clinaudit
