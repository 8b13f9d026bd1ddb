#pragma once

// Deterministic FedAvg simulator: one server, in-process clients, round-based
// sample-count-weighted parameter averaging, optional DP-SGD local training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "clinaudit/dataset.hpp"
#include "clinaudit/errors.hpp"
#include "clinaudit/metrics.hpp"
#include "clinaudit/model.hpp"
#include "clinaudit/privacy.hpp"

#include "json.hpp"

namespace clinaudit {

enum class PartitionPlan { Iid, LabelSkew };

struct FederationConfig {
    std::size_t n_clients = 2;
    std::size_t rounds = 10;
    double client_fraction = 1.0;  // q in (0,1]
    std::size_t local_epochs = 1;
    PartitionPlan partition = PartitionPlan::Iid;
    std::optional<PrivacySpec> privacy;  // applied in every client update
    double dropout_prob = 0.0;           // simulator knob
    std::uint64_t seed = 0;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<std::size_t> selected_clients;
    std::vector<std::size_t> sample_counts;
    std::vector<std::string> skipped;  // client id + reason
    double checksum = 0.0;             // sum of global parameters
    double accuracy = 0.0;
    double auc = 0.0;
};

// Disjoint cover of the pool. Iid deals a shuffled order into balanced
// chunks; label-skew sorts by label and deals contiguous shards, so each
// client sees a heavily skewed class mix.
inline std::vector<Dataset> partition_data(const Dataset& pool,
                                           PartitionPlan plan,
                                           std::size_t n_clients,
                                           std::uint64_t seed) {
    if (n_clients == 0 || n_clients > pool.n)
        throw DataError("need 1 <= n_clients <= n");
    std::vector<std::size_t> order(pool.n);
    for (std::size_t i = 0; i < pool.n; ++i) order[i] = i;

    Rng rng(seed);
    if (plan == PartitionPlan::Iid) {
        rng.shuffle(order);
    } else {
        rng.shuffle(order);  // break index ties before the stable label sort
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return pool.labels[a] < pool.labels[b];
                         });
    }

    std::vector<Dataset> clients;
    const std::size_t base = pool.n / n_clients, extra = pool.n % n_clients;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < n_clients; ++c) {
        const std::size_t size = base + (c < extra ? 1 : 0);
        std::vector<std::size_t> idx(order.begin() + pos,
                                     order.begin() + pos + size);
        pos += size;
        std::sort(idx.begin(), idx.end());
        clients.push_back(pool.subset(idx));
    }
    return clients;
}

struct ClientUpdate {
    std::vector<double> params;
    std::size_t sample_count = 0;
};

// Local training from the current global parameters. The caller owns the
// client's shuffle stream so batch schedules persist across rounds (this is
// what makes the single-client run bit-identical to centralized training).
inline ClientUpdate client_update(const std::vector<double>& global_params,
                                  const Dataset& local, const Architecture& arch,
                                  const TrainConfig& cfg, std::size_t local_epochs,
                                  const std::optional<PrivacySpec>& priv,
                                  Rng& shuffle_rng) {
    if (local.d != arch.input_dim) throw DataError("client width mismatch");
    if (local_epochs == 0) return {global_params, local.n};
    if (local.single_class())
        throw DataError("client data is single-class");

    TrainConfig local_cfg = cfg;
    local_cfg.epochs = local_epochs;
    double clip = std::numeric_limits<double>::infinity();
    double sigma = 0.0;
    if (priv) {
        clip = priv->clip_norm;
        sigma = priv->noise_scale;
    }
    const Model m = sgd_train(local, arch, local_cfg, clip, sigma, nullptr,
                              &global_params, &shuffle_rng);
    return {m.params, local.n};
}

// Coordinate-wise weighted mean with weights n_k / sum(n_k), accumulated in
// the order given (callers pass client-id order, so the reduction is
// schedule-independent).
inline std::vector<double> server_aggregate(
    const std::vector<ClientUpdate>& updates) {
    if (updates.empty())
        throw DataError("empty update set: every client was skipped");
    const std::size_t len = updates[0].params.size();
    double total = 0.0;
    for (const auto& u : updates) {
        if (u.params.size() != len)
            throw DataError("update length mismatch");
        total += static_cast<double>(u.sample_count);
    }
    if (total <= 0.0) throw DataError("no samples behind the updates");
    std::vector<double> out(len, 0.0);
    for (const auto& u : updates) {
        const double w = static_cast<double>(u.sample_count) / total;
        for (std::size_t j = 0; j < len; ++j) out[j] += w * u.params[j];
    }
    return out;
}

struct FedAvgResult {
    Model model;
    std::vector<RoundRecord> rounds;
    std::vector<Dataset> client_data;
};

inline FedAvgResult fedavg_run(const Dataset& pool, const FederationConfig& fed,
                               const Architecture& arch, const TrainConfig& cfg,
                               const Dataset* eval_set = nullptr) {
    if (fed.rounds == 0) throw DataError("rounds must be >= 1");
    if (!(fed.client_fraction > 0.0 && fed.client_fraction <= 1.0))
        throw DataError("client_fraction must be in (0,1]");

    FedAvgResult result;
    result.client_data =
        partition_data(pool, fed.partition, fed.n_clients, fed.seed);

    Model global = init_model(arch, cfg.seed);
    // Per-client persistent shuffle streams; client 0 mirrors the
    // centralized stream.
    std::vector<Rng> client_rngs;
    for (std::size_t c = 0; c < fed.n_clients; ++c)
        client_rngs.emplace_back(cfg.seed + c);

    Rng select_rng(fed.seed ^ 0xfeedULL);
    const auto n_select = static_cast<std::size_t>(std::ceil(
        fed.client_fraction * static_cast<double>(fed.n_clients)));

    const Dataset& eval = eval_set ? *eval_set : pool;

    for (std::size_t round = 0; round < fed.rounds; ++round) {
        auto ids = shuffled_indices(fed.n_clients, select_rng);
        ids.resize(n_select);
        std::sort(ids.begin(), ids.end());

        RoundRecord rec;
        rec.round = round;
        std::vector<ClientUpdate> updates;
        for (std::size_t c : ids) {
            if (fed.dropout_prob > 0.0 &&
                select_rng.uniform() < fed.dropout_prob) {
                rec.skipped.push_back("client " + std::to_string(c) +
                                      ": dropped out");
                continue;
            }
            try {
                auto up = client_update(global.params, result.client_data[c],
                                        arch, cfg, fed.local_epochs,
                                        fed.privacy, client_rngs[c]);
                rec.selected_clients.push_back(c);
                rec.sample_counts.push_back(up.sample_count);
                updates.push_back(std::move(up));
            } catch (const DataError& e) {
                rec.skipped.push_back("client " + std::to_string(c) + ": " +
                                      e.what());
            }
        }
        global.params = server_aggregate(updates);

        for (double p : global.params) rec.checksum += p;
        global.trained = true;
        PredictionSet preds;
        preds.labels = eval.labels;
        preds.probs = predict_proba(global, eval);
        rec.accuracy = 1.0 - empirical_risk(preds, LossKind::ZeroOne);
        if (preds.both_classes()) rec.auc = roc_auc(preds).auc;
        result.rounds.push_back(std::move(rec));
    }
    global.trained = true;
    result.model = std::move(global);
    return result;
}

inline void write_round_log(const std::vector<RoundRecord>& rounds,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open round log " + path);
    for (const auto& r : rounds) {
        nlohmann::json j = {{"round", r.round},
                            {"selected_clients", r.selected_clients},
                            {"sample_counts", r.sample_counts},
                            {"skipped", r.skipped},
                            {"checksum", r.checksum},
                            {"accuracy", r.accuracy},
                            {"auc", r.auc}};
        out << j.dump() << "\n";
    }
}

}  // namespace clinaudit
