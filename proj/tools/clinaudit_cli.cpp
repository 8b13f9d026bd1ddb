// clinaudit command-line driver: reproducible audit pipelines over CSV
// inputs, emitting JSON reports and CSV curves.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "clinaudit/clinaudit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clinaudit;

namespace {

struct CommonOpts {
    std::string input;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string config_file;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--input", c.input, "Input CSV");
    cmd->add_option("--out", c.out_dir, "Output directory");
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--config", c.config_file,
                    "JSON config file; explicit flags override its values");
}

// Flags override config-file values: the file is applied only where the
// flag was not passed on the command line.
void apply_config(CLI::App* cmd, const CommonOpts& c) {
    if (c.config_file.empty()) return;
    std::ifstream in(c.config_file);
    if (!in) throw DataError("cannot open config file " + c.config_file);
    json cfg = json::parse(in);
    for (auto& [key, value] : cfg.items()) {
        auto* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || !opt->empty()) continue;
        std::ostringstream os;
        if (value.is_string())
            os << value.get<std::string>();
        else
            os << value.dump();
        opt->add_result(os.str());
        opt->run_callback();
    }
}

fs::path resolve_out(const CommonOpts& c) {
    std::string dir = c.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("CLINAUDIT_OUT")) dir = env;
        else dir = ".";
    }
    fs::create_directories(dir);
    return dir;
}

// Prediction CSV: header with `label` and `prob` columns, optional `group`,
// any further 0/1 columns are binary-test comparators.
struct PredictionFile {
    PredictionSet preds;
    std::map<std::string, std::vector<int>> comparators;
};

PredictionFile read_predictions(const std::string& path) {
    CsvOptions opt;
    opt.impute = ImputePolicy::Error;
    const Dataset ds = load_csv(path, opt);
    PredictionFile pf;
    pf.preds.labels = ds.labels;
    pf.preds.group = ds.group;
    std::ptrdiff_t prob_col = -1;
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j)
        if (ds.feature_names[j] == "prob") prob_col = static_cast<std::ptrdiff_t>(j);
    if (prob_col < 0) throw DataError("prediction CSV needs a 'prob' column");
    for (std::size_t i = 0; i < ds.n; ++i)
        pf.preds.probs.push_back(ds.at(i, prob_col));
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        if (static_cast<std::ptrdiff_t>(j) == prob_col) continue;
        std::vector<int> calls;
        bool binary = true;
        for (std::size_t i = 0; i < ds.n; ++i) {
            const double v = ds.at(i, j);
            if (v != 0.0 && v != 1.0) { binary = false; break; }
            calls.push_back(v == 1.0 ? 1 : 0);
        }
        if (binary) pf.comparators[ds.feature_names[j]] = std::move(calls);
    }
    return pf;
}

void write_report(const EvaluationReport& rep, const fs::path& out_dir,
                  const std::string& name = "report.json") {
    json j = rep.to_json();
    j["timestamp"] = static_cast<std::uint64_t>(std::time(nullptr));
    std::ofstream out(out_dir / name);
    if (!out) throw DataError("cannot write report");
    out << j.dump(2) << "\n";
}

Architecture parse_arch(std::size_t input_dim, const std::string& hidden_csv,
                        const std::string& activation, double beta) {
    Architecture arch;
    arch.input_dim = input_dim;
    if (!hidden_csv.empty()) {
        std::stringstream ss(hidden_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            arch.hidden.push_back(std::stoul(tok));
    }
    arch.activation.kind =
        activation == "softplus" ? ActivationKind::Softplus : ActivationKind::Relu;
    arch.activation.beta = beta;
    return arch;
}

Model load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path);
    return model_from_json(json::parse(in));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clinaudit: train small predictive models and audit their "
                 "discrimination, calibration, clinical utility, fairness, "
                 "explanations and privacy"};
    app.require_subcommand(0, 1);
    bool show_version = false;
    app.add_flag("--version", show_version, "Print report schema version");

    // ---- train ----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Train a model (optionally DP-SGD)");
    CommonOpts tr_c;
    add_common(train_cmd, tr_c);
    std::string tr_hidden, tr_act = "relu";
    double tr_beta = 1.0, tr_lr = 0.1, tr_l2 = 0.0, tr_clip = 1.0, tr_sigma = 0.0;
    std::size_t tr_epochs = 100, tr_batch = 32;
    bool tr_dp = false, tr_tree = false;
    std::size_t tr_depth = 3, tr_min_leaf = 1;
    train_cmd->add_option("--hidden", tr_hidden, "Hidden widths, comma separated");
    train_cmd->add_option("--activation", tr_act, "relu|softplus");
    train_cmd->add_option("--softplus-beta", tr_beta, "Softplus sharpness");
    train_cmd->add_option("--lr", tr_lr, "Learning rate");
    train_cmd->add_option("--epochs", tr_epochs, "Epochs");
    train_cmd->add_option("--batch", tr_batch, "Batch size");
    train_cmd->add_option("--l2", tr_l2, "L2 weight decay");
    train_cmd->add_flag("--dp", tr_dp, "Train with DP-SGD");
    train_cmd->add_option("--clip", tr_clip, "DP-SGD clip norm C");
    train_cmd->add_option("--sigma", tr_sigma, "DP-SGD noise scale");
    train_cmd->add_flag("--tree", tr_tree, "Train a decision tree instead");
    train_cmd->add_option("--max-depth", tr_depth, "Tree depth limit");
    train_cmd->add_option("--min-leaf", tr_min_leaf, "Minimum rows per leaf");

    // ---- validate -------------------------------------------------------
    auto* val_cmd = app.add_subcommand("validate", "Cross-validate or evaluate externally");
    CommonOpts va_c;
    add_common(val_cmd, va_c);
    std::size_t va_k = 5, va_repeats = 1, va_inner_k = 3;
    bool va_strat = false, va_loocv = false;
    std::string va_hidden, va_external, va_model, va_grid;
    double va_lr = 0.1, va_l2 = 0.0;
    std::size_t va_epochs = 100, va_batch = 32;
    val_cmd->add_option("--k", va_k, "Fold count");
    val_cmd->add_flag("--stratified", va_strat, "Stratified folds");
    val_cmd->add_flag("--loocv", va_loocv, "Leave-one-out");
    val_cmd->add_option("--repeats", va_repeats, "Repeated CV count");
    val_cmd->add_option("--hidden", va_hidden, "Hidden widths");
    val_cmd->add_option("--lr", va_lr, "Learning rate");
    val_cmd->add_option("--epochs", va_epochs, "Epochs");
    val_cmd->add_option("--batch", va_batch, "Batch size");
    val_cmd->add_option("--l2", va_l2, "L2 weight decay");
    val_cmd->add_option("--external", va_external, "External cohort CSV (with --model)");
    val_cmd->add_option("--model", va_model, "Trained model JSON");
    val_cmd->add_option("--grid", va_grid,
                        "Nested CV lambda grid, comma separated");
    val_cmd->add_option("--inner-k", va_inner_k, "Inner fold count for nested CV");

    // ---- calibrate ------------------------------------------------------
    auto* cal_cmd = app.add_subcommand("calibrate", "Calibration report from a prediction CSV");
    CommonOpts ca_c;
    add_common(cal_cmd, ca_c);
    std::size_t ca_bins = 10;
    std::string ca_binning = "equal_width";
    bool ca_recal = false;
    cal_cmd->add_option("--bins", ca_bins, "Bin count");
    cal_cmd->add_option("--binning", ca_binning, "equal_width|equal_frequency");
    cal_cmd->add_flag("--recalibrate", ca_recal, "Also fit a recalibration map");

    // ---- dca ------------------------------------------------------------
    auto* dca_cmd = app.add_subcommand("dca", "Decision curve analysis");
    CommonOpts dc_c;
    add_common(dca_cmd, dc_c);
    double dc_lo = 0.01, dc_hi = 0.99, dc_step = 0.01;
    dca_cmd->add_option("--grid-lo", dc_lo, "Lowest threshold");
    dca_cmd->add_option("--grid-hi", dc_hi, "Highest threshold");
    dca_cmd->add_option("--grid-step", dc_step, "Threshold step");

    // ---- fairness -------------------------------------------------------
    auto* fair_cmd = app.add_subcommand("fairness", "Group fairness audit");
    CommonOpts fa_c;
    add_common(fair_cmd, fa_c);
    double fa_threshold = 0.5;
    std::size_t fa_bins = 10;
    fair_cmd->add_option("--threshold", fa_threshold, "Classification threshold");
    fair_cmd->add_option("--bins", fa_bins, "Score bins for sufficiency");

    // ---- explain --------------------------------------------------------
    auto* exp_cmd = app.add_subcommand("explain", "Model explanations");
    CommonOpts ex_c;
    add_common(exp_cmd, ex_c);
    std::string ex_model, ex_method = "permutation", ex_surrogate;
    std::size_t ex_repeats = 5, ex_instance = 0, ex_background = 50;
    exp_cmd->add_option("--model", ex_model, "Trained model JSON")->required();
    exp_cmd->add_option("--method", ex_method, "permutation|shapley|surrogate");
    exp_cmd->add_option("--repeats", ex_repeats, "Permutation repeats");
    exp_cmd->add_option("--instance", ex_instance, "Row index for shapley");
    exp_cmd->add_option("--background", ex_background, "Background rows for shapley");
    exp_cmd->add_option("--surrogate", ex_surrogate, "Surrogate model JSON");

    // ---- fedsim ---------------------------------------------------------
    auto* fed_cmd = app.add_subcommand("fedsim", "Federated averaging simulation");
    CommonOpts fe_c;
    add_common(fed_cmd, fe_c);
    std::size_t fe_clients = 4, fe_rounds = 10, fe_local = 1;
    double fe_fraction = 1.0, fe_lr = 0.1, fe_clip = 1.0, fe_sigma = 0.0;
    std::size_t fe_epochs_unused = 0;
    (void)fe_epochs_unused;
    std::string fe_partition = "iid", fe_hidden;
    std::size_t fe_batch = 32;
    bool fe_dp = false;
    fed_cmd->add_option("--clients", fe_clients, "Client count");
    fed_cmd->add_option("--rounds", fe_rounds, "Communication rounds");
    fed_cmd->add_option("--fraction", fe_fraction, "Client fraction per round");
    fed_cmd->add_option("--local-epochs", fe_local, "Local epochs per round");
    fed_cmd->add_option("--partition", fe_partition, "iid|label_skew");
    fed_cmd->add_option("--hidden", fe_hidden, "Hidden widths");
    fed_cmd->add_option("--lr", fe_lr, "Learning rate");
    fed_cmd->add_option("--batch", fe_batch, "Batch size");
    fed_cmd->add_flag("--dp", fe_dp, "DP-SGD on clients");
    fed_cmd->add_option("--clip", fe_clip, "Client clip norm");
    fed_cmd->add_option("--sigma", fe_sigma, "Client noise scale");

    // ---- attack ---------------------------------------------------------
    auto* atk_cmd = app.add_subcommand("attack", "Adversary harness");
    atk_cmd->require_subcommand(1);
    CommonOpts at_c;
    std::string at_kind;
    auto* mia_cmd = atk_cmd->add_subcommand("mia", "Shadow-model membership inference");
    add_common(mia_cmd, at_c);
    std::size_t mia_shadows = 4;
    std::string mia_hidden;
    std::size_t mia_epochs = 200, mia_target_n = 0;
    double mia_lr = 0.5;
    mia_cmd->add_option("--shadows", mia_shadows, "Shadow model count");
    mia_cmd->add_option("--hidden", mia_hidden, "Target/shadow hidden widths");
    mia_cmd->add_option("--epochs", mia_epochs, "Training epochs");
    mia_cmd->add_option("--lr", mia_lr, "Learning rate");
    mia_cmd->add_option("--target-n", mia_target_n,
                        "Rows for target training (default n/4)");

    CommonOpts ev_c;
    std::string ev_model;
    double ev_eps = 0.1, ev_alpha = 0.025, ev_lo = -1e30, ev_hi = 1e30, ev_h = 1e-3;
    std::size_t ev_iters = 10;
    auto* fgsm_cmd = atk_cmd->add_subcommand("fgsm", "One-step gradient-sign attack");
    auto* pgd_cmd = atk_cmd->add_subcommand("pgd", "Projected gradient attack");
    auto* zoo_cmd = atk_cmd->add_subcommand("zoo", "Query-only gradient estimation");
    for (auto* cmd : {fgsm_cmd, pgd_cmd, zoo_cmd}) {
        add_common(cmd, ev_c);
        cmd->add_option("--model", ev_model, "Trained model JSON")->required();
    }
    fgsm_cmd->add_option("--eps", ev_eps, "L-inf budget");
    pgd_cmd->add_option("--eps", ev_eps, "L-inf budget");
    pgd_cmd->add_option("--step", ev_alpha, "Step size");
    pgd_cmd->add_option("--iters", ev_iters, "Iterations");
    for (auto* cmd : {fgsm_cmd, pgd_cmd}) {
        cmd->add_option("--domain-lo", ev_lo, "Domain lower bound");
        cmd->add_option("--domain-hi", ev_hi, "Domain upper bound");
    }
    zoo_cmd->add_option("--fd-step", ev_h, "Finite-difference step h");

    // ---- report merge ---------------------------------------------------
    auto* rep_cmd = app.add_subcommand("report", "Merge report JSON files");
    CommonOpts re_c;
    add_common(rep_cmd, re_c);
    std::vector<std::string> re_inputs;
    rep_cmd->add_option("--merge", re_inputs, "Report files to merge");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (show_version) {
        std::cout << "clinaudit schema_version " << kReportSchemaVersion << "\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 1;
    }

    try {
        if (*train_cmd) {
            apply_config(train_cmd, tr_c);
            const fs::path out = resolve_out(tr_c);
            CsvOptions copt;
            copt.impute = ImputePolicy::Mean;
            const Dataset ds = load_csv(tr_c.input, copt);
            EvaluationReport rep;
            rep.seed = tr_c.seed;
            rep.warnings = ds.warnings;
            rep.config = {{"subcommand", "train"}, {"input", tr_c.input},
                          {"seed", tr_c.seed}, {"dp", tr_dp}};
            Model model;
            if (tr_tree) {
                model = train_tree(ds, tr_depth, tr_min_leaf);
            } else {
                const auto arch = parse_arch(ds.d, tr_hidden, tr_act, tr_beta);
                TrainConfig cfg{tr_lr, tr_epochs, tr_batch, tr_l2, tr_c.seed};
                if (tr_dp) {
                    PrivacySpec priv;
                    priv.clip_norm = tr_clip;
                    priv.noise_scale = tr_sigma;
                    auto result = dp_sgd_train(ds, arch, cfg, priv);
                    model = std::move(result.model);
                    write_audit_log(result.audit, (out / "audit.jsonl").string());
                    rep.curve_files["audit"] = (out / "audit.jsonl").string();
                } else {
                    model = train(ds, arch, cfg);
                }
            }
            std::ofstream mf(out / "model.json");
            mf << model_to_json(model).dump(2) << "\n";
            PredictionSet preds;
            preds.labels = ds.labels;
            preds.probs = predict_proba(model, ds);
            rep.scalars["train_accuracy"] =
                1.0 - empirical_risk(preds, LossKind::ZeroOne);
            rep.scalars["train_log_loss"] = empirical_risk(preds, LossKind::LogLoss);
            if (preds.both_classes()) rep.scalars["train_auc"] = roc_auc(preds).auc;
            write_report(rep, out);
        } else if (*val_cmd) {
            apply_config(val_cmd, va_c);
            const fs::path out = resolve_out(va_c);
            CsvOptions copt;
            copt.impute = ImputePolicy::Mean;
            EvaluationReport rep;
            rep.seed = va_c.seed;
            rep.config = {{"subcommand", "validate"}, {"input", va_c.input},
                          {"seed", va_c.seed}, {"k", va_k},
                          {"stratified", va_strat}, {"loocv", va_loocv}};
            if (!va_external.empty()) {
                const Model model = load_model_file(va_model);
                const Dataset ext = load_csv(va_external, copt);
                for (const auto& [name, v] : evaluate_external(model, ext))
                    rep.scalars["external_" + name] = v;
                write_report(rep, out);
            } else {
                const Dataset ds = load_csv(va_c.input, copt);
                rep.warnings = ds.warnings;
                const auto arch = parse_arch(ds.d, va_hidden, "relu", 1.0);
                TrainConfig cfg{va_lr, va_epochs, va_batch, va_l2, va_c.seed};
                const FoldMode mode = va_loocv ? FoldMode::Loocv
                                    : va_strat ? FoldMode::Stratified
                                               : FoldMode::Plain;
                CvResult cv;
                if (!va_grid.empty()) {
                    std::vector<double> grid;
                    std::stringstream ss(va_grid);
                    std::string tok;
                    while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
                    const auto plan = make_folds(ds, va_k, mode, va_c.seed);
                    cv = nested_cross_validate(ds, arch, grid, plan, va_inner_k, cfg);
                } else if (va_repeats > 1) {
                    cv = repeated_cross_validate(ds, arch, cfg, va_k, mode,
                                                 va_repeats, va_c.seed);
                } else {
                    const auto plan = make_folds(ds, va_k, mode, va_c.seed);
                    cv = cross_validate(ds, arch, cfg, plan);
                }
                json folds = json::array();
                for (std::size_t f = 0; f < cv.per_fold.size(); ++f) {
                    json row;
                    for (std::size_t m = 0; m < cv.metric_names.size(); ++m)
                        row[cv.metric_names[m]] = cv.per_fold[f][m];
                    // Per-fold class counts, for stratification audits.
                    if (f < cv.plan.k) {
                        std::size_t pos = 0, tot = 0;
                        for (std::size_t i = 0; i < cv.plan.assignments.size(); ++i)
                            if (cv.plan.assignments[i] == f) {
                                ++tot;
                                pos += static_cast<std::size_t>(ds.labels[i]);
                            }
                        row["fold_size"] = tot;
                        row["fold_positives"] = pos;
                    }
                    folds.push_back(row);
                }
                rep.config["folds"] = folds;
                if (!cv.chosen_hyper.empty())
                    rep.config["chosen_lambda"] = cv.chosen_hyper;
                for (std::size_t m = 0; m < cv.metric_names.size(); ++m) {
                    rep.scalars["mean_" + cv.metric_names[m]] = cv.mean[m];
                    rep.scalars["sd_" + cv.metric_names[m]] = cv.sd[m];
                }
                rep.scalars["pooled_auc"] = cv.pooled_auc;
                write_report(rep, out);
            }
        } else if (*cal_cmd) {
            apply_config(cal_cmd, ca_c);
            const fs::path out = resolve_out(ca_c);
            const auto pf = read_predictions(ca_c.input);
            const Binning binning = ca_binning == "equal_frequency"
                                        ? Binning::EqualFrequency
                                        : Binning::EqualWidth;
            const auto cal = calibration_report(pf.preds, ca_bins, binning);
            EvaluationReport rep;
            rep.seed = ca_c.seed;
            rep.config = {{"subcommand", "calibrate"}, {"input", ca_c.input},
                          {"seed", ca_c.seed}, {"bins", ca_bins},
                          {"binning", ca_binning}};
            rep.warnings = cal.warnings;
            rep.scalars["alpha"] = cal.alpha;
            rep.scalars["beta"] = cal.beta;
            rep.scalars["ece"] = cal.ece;
            if (ca_recal) {
                const auto map = recalibrate(pf.preds);
                rep.scalars["recal_intercept"] = map.intercept;
                rep.scalars["recal_slope"] = map.slope;
            }
            const auto curve_path = out / "calibration_curve.csv";
            write_calibration_csv(cal.bins, curve_path.string());
            rep.curve_files["calibration_curve"] = curve_path.string();
            write_report(rep, out);
        } else if (*dca_cmd) {
            apply_config(dca_cmd, dc_c);
            const fs::path out = resolve_out(dc_c);
            const auto pf = read_predictions(dc_c.input);
            const auto curve =
                decision_curve(pf.preds, {dc_lo, dc_hi, dc_step}, pf.comparators);
            EvaluationReport rep;
            rep.seed = dc_c.seed;
            rep.config = {{"subcommand", "dca"}, {"input", dc_c.input},
                          {"seed", dc_c.seed}, {"grid_lo", dc_lo},
                          {"grid_hi", dc_hi}, {"grid_step", dc_step}};
            const auto curve_path = out / "decision_curve.csv";
            write_decision_curve_csv(curve, curve_path.string());
            rep.curve_files["decision_curve"] = curve_path.string();
            double pos = 0.0;
            for (int y : pf.preds.labels) pos += y;
            rep.scalars["prevalence"] = pos / static_cast<double>(pf.preds.size());
            write_report(rep, out);
        } else if (*fair_cmd) {
            apply_config(fair_cmd, fa_c);
            const fs::path out = resolve_out(fa_c);
            const auto pf = read_predictions(fa_c.input);
            const auto rep_f = fairness_report(pf.preds, fa_threshold, fa_bins);
            EvaluationReport rep;
            rep.seed = fa_c.seed;
            rep.config = {{"subcommand", "fairness"}, {"input", fa_c.input},
                          {"seed", fa_c.seed}, {"threshold", fa_threshold}};
            rep.scalars["spd"] = rep_f.spd;
            rep.scalars["independence_gap"] = rep_f.criteria.independence_gap;
            rep.scalars["separation_gap"] = rep_f.criteria.separation_gap;
            rep.scalars["sufficiency_gap"] = rep_f.criteria.sufficiency_gap;
            json groups = json::array();
            for (std::size_t g = 0; g < rep_f.groups.size(); ++g) {
                const auto& c = rep_f.per_group_counts[g];
                const auto& cal = rep_f.calibration[g];
                json row = {{"group", rep_f.groups[g]},
                            {"tp", c.tp}, {"fp", c.fp},
                            {"tn", c.tn}, {"fn", c.fn},
                            {"ece", cal.ece}};
                if (cal.alpha) row["alpha"] = *cal.alpha;
                if (cal.beta) row["beta"] = *cal.beta;
                if (!cal.error.empty()) row["error"] = cal.error;
                groups.push_back(row);
            }
            rep.config["per_group"] = groups;
            for (const auto& w : rep_f.criteria.undefined_components)
                rep.warnings.push_back(w);
            write_report(rep, out);
        } else if (*exp_cmd) {
            apply_config(exp_cmd, ex_c);
            const fs::path out = resolve_out(ex_c);
            CsvOptions copt;
            copt.impute = ImputePolicy::Mean;
            const Dataset ds = load_csv(ex_c.input, copt);
            const Model model = load_model_file(ex_model);
            EvaluationReport rep;
            rep.seed = ex_c.seed;
            rep.config = {{"subcommand", "explain"}, {"input", ex_c.input},
                          {"seed", ex_c.seed}, {"method", ex_method}};
            if (ex_method == "surrogate") {
                const Model surrogate = ex_surrogate.empty()
                                            ? train_tree(ds, 3, 1)
                                            : load_model_file(ex_surrogate);
                rep.scalars["fidelity"] = surrogate_fidelity(model, surrogate, ds);
                if (surrogate.kind == ModelKind::Tree)
                    rep.scalars["parsimony_leaves"] =
                        static_cast<double>(surrogate_parsimony(surrogate));
            } else {
                Attribution attr;
                if (ex_method == "shapley") {
                    std::vector<std::size_t> bg_idx;
                    for (std::size_t i = 0;
                         i < std::min<std::size_t>(ex_background, ds.n); ++i)
                        bg_idx.push_back(i);
                    const std::vector<double> inst(ds.row(ex_instance),
                                                   ds.row(ex_instance) + ds.d);
                    attr = shapley_exact(model, inst, ds.subset(bg_idx));
                } else {
                    attr = permutation_importance(model, ds, ex_repeats, ex_c.seed);
                }
                const auto path = out / "attribution.csv";
                write_attribution_csv(ds.feature_names, attr.values, path.string());
                rep.curve_files["attribution"] = path.string();
            }
            write_report(rep, out);
        } else if (*fed_cmd) {
            apply_config(fed_cmd, fe_c);
            const fs::path out = resolve_out(fe_c);
            CsvOptions copt;
            copt.impute = ImputePolicy::Mean;
            const Dataset pool = load_csv(fe_c.input, copt);
            FederationConfig fed;
            fed.n_clients = fe_clients;
            fed.rounds = fe_rounds;
            fed.client_fraction = fe_fraction;
            fed.local_epochs = fe_local;
            fed.partition = fe_partition == "label_skew" ? PartitionPlan::LabelSkew
                                                         : PartitionPlan::Iid;
            fed.seed = fe_c.seed;
            if (fe_dp) {
                PrivacySpec priv;
                priv.clip_norm = fe_clip;
                priv.noise_scale = fe_sigma;
                fed.privacy = priv;
            }
            const auto arch = parse_arch(pool.d, fe_hidden, "relu", 1.0);
            TrainConfig cfg{fe_lr, 1, fe_batch, 0.0, fe_c.seed};
            const auto result = fedavg_run(pool, fed, arch, cfg);
            write_round_log(result.rounds, (out / "rounds.jsonl").string());
            std::ofstream mf(out / "model.json");
            mf << model_to_json(result.model).dump(2) << "\n";
            EvaluationReport rep;
            rep.seed = fe_c.seed;
            rep.config = {{"subcommand", "fedsim"}, {"input", fe_c.input},
                          {"seed", fe_c.seed}, {"clients", fe_clients},
                          {"rounds", fe_rounds}, {"partition", fe_partition}};
            rep.scalars["final_accuracy"] = result.rounds.back().accuracy;
            rep.scalars["final_auc"] = result.rounds.back().auc;
            rep.curve_files["rounds"] = (out / "rounds.jsonl").string();
            write_report(rep, out);
        } else if (*atk_cmd) {
            if (*mia_cmd) {
                apply_config(mia_cmd, at_c);
                const fs::path out = resolve_out(at_c);
                CsvOptions copt;
                copt.impute = ImputePolicy::Mean;
                const Dataset pool = load_csv(at_c.input, copt);
                const std::size_t tn = mia_target_n ? mia_target_n : pool.n / 4;
                if (pool.n < 4 * tn)
                    throw DataError("pool too small for disjoint member/"
                                    "non-member/shadow sets");
                std::vector<std::size_t> all(pool.n);
                for (std::size_t i = 0; i < pool.n; ++i) all[i] = i;
                Rng rng(at_c.seed);
                rng.shuffle(all);
                std::vector<std::size_t> member_idx(all.begin(), all.begin() + tn);
                std::vector<std::size_t> non_idx(all.begin() + tn,
                                                 all.begin() + 2 * tn);
                std::vector<std::size_t> shadow_idx(all.begin() + 2 * tn, all.end());
                const Dataset members = pool.subset(member_idx);
                const Dataset non_members = pool.subset(non_idx);
                const Dataset shadow_pool = pool.subset(shadow_idx);
                const auto arch = parse_arch(pool.d, mia_hidden, "relu", 1.0);
                TrainConfig cfg{mia_lr, mia_epochs, 32, 0.0, at_c.seed};
                const Model target = train(members, arch, cfg);
                MiaSetup setup;
                setup.shadow_count = mia_shadows;
                setup.shadow_arch = arch;
                setup.shadow_cfg = cfg;
                setup.seed = at_c.seed;
                const auto result = mia_shadow_attack(target, setup, members,
                                                      non_members, shadow_pool);
                EvaluationReport rep;
                rep.seed = at_c.seed;
                rep.config = {{"subcommand", "attack mia"}, {"input", at_c.input},
                              {"seed", at_c.seed}, {"shadows", mia_shadows}};
                rep.scalars["attack_auc"] = result.attack_auc;
                rep.scalars["attack_advantage"] = result.advantage;
                write_report(rep, out);
            } else {
                apply_config(*fgsm_cmd ? fgsm_cmd : *pgd_cmd ? pgd_cmd : zoo_cmd,
                             ev_c);
                const fs::path out = resolve_out(ev_c);
                CsvOptions copt;
                copt.impute = ImputePolicy::Mean;
                const Dataset ds = load_csv(ev_c.input, copt);
                const Model model = load_model_file(ev_model);
                EvaluationReport rep;
                rep.seed = ev_c.seed;
                if (*zoo_cmd) {
                    rep.config = {{"subcommand", "attack zoo"},
                                  {"input", ev_c.input}, {"h", ev_h}};
                    // Estimated gradient for every row, written as CSV.
                    std::ofstream gf(out / "zoo_gradients.csv");
                    for (std::size_t j = 0; j < ds.d; ++j)
                        gf << (j ? "," : "") << "g_" << ds.feature_names[j];
                    gf << "\n";
                    bool warned = false;
                    for (std::size_t i = 0; i < ds.n; ++i) {
                        const std::vector<double> x(ds.row(i), ds.row(i) + ds.d);
                        const auto est = zoo_gradient(
                            loss_query(model, ds.labels[i]), x, ev_h);
                        warned = warned || est.underflow_warning;
                        for (std::size_t j = 0; j < ds.d; ++j)
                            gf << (j ? "," : "") << est.gradient[j];
                        gf << "\n";
                    }
                    if (warned)
                        rep.warnings.push_back(
                            "finite-difference step h may be too small");
                    rep.curve_files["zoo_gradients"] =
                        (out / "zoo_gradients.csv").string();
                } else {
                    const bool is_pgd = static_cast<bool>(*pgd_cmd);
                    rep.config = {{"subcommand", is_pgd ? "attack pgd" : "attack fgsm"},
                                  {"input", ev_c.input}, {"eps", ev_eps}};
                    DomainBounds bounds{ev_lo, ev_hi};
                    std::vector<std::vector<double>> adv;
                    for (std::size_t i = 0; i < ds.n; ++i) {
                        const std::vector<double> x(ds.row(i), ds.row(i) + ds.d);
                        adv.push_back(is_pgd
                                          ? pgd(model, x, ds.labels[i], ev_eps,
                                                ev_alpha, ev_iters, bounds)
                                          : fgsm(model, x, ds.labels[i], ev_eps,
                                                 bounds));
                    }
                    rep.scalars["success_rate"] =
                        evasion_success_rate(model, ds, adv);
                    std::ofstream af(out / "adversarial.csv");
                    for (std::size_t j = 0; j < ds.d; ++j)
                        af << (j ? "," : "") << ds.feature_names[j];
                    af << ",label\n";
                    for (std::size_t i = 0; i < ds.n; ++i) {
                        for (std::size_t j = 0; j < ds.d; ++j)
                            af << (j ? "," : "") << adv[i][j];
                        af << "," << ds.labels[i] << "\n";
                    }
                    rep.curve_files["adversarial"] = (out / "adversarial.csv").string();
                }
                write_report(rep, out);
            }
        } else if (*rep_cmd) {
            apply_config(rep_cmd, re_c);
            const fs::path out = resolve_out(re_c);
            EvaluationReport merged;
            merged.seed = re_c.seed;
            merged.config = {{"subcommand", "report"}, {"merged", re_inputs}};
            for (const auto& path : re_inputs) {
                std::ifstream in(path);
                if (!in) throw DataError("cannot open report " + path);
                const auto rep = EvaluationReport::from_json(json::parse(in));
                const std::string prefix =
                    fs::path(path).stem().string() + ".";
                for (const auto& [k, v] : rep.scalars)
                    merged.scalars[prefix + k] = v;
                for (const auto& [k, v] : rep.curve_files)
                    merged.curve_files[prefix + k] = v;
                for (const auto& w : rep.warnings)
                    merged.warnings.push_back(prefix + w);
            }
            write_report(merged, out, "merged_report.json");
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
