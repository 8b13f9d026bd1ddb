#include "catch_amalgamated.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clinaudit/dca.hpp"
#include "clinaudit/metrics.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = CLINAUDIT_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >cli_stdout.txt 2>cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::path("tmp_cli_" + std::to_string(::rand()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
        fs::remove("cli_stdout.txt");
        fs::remove("cli_stderr.txt");
    }
    std::string str(const std::string& name = "") const {
        return (name.empty() ? path : path / name).string();
    }
};

// n=100 feature fixture with 20 positives, cleanly learnable.
void write_data_csv(const std::string& path) {
    std::ofstream out(path);
    out << "x1,x2,label\n";
    for (int i = 0; i < 100; ++i) {
        const int y = i < 20 ? 1 : 0;
        out << (y ? 1.0 : -1.0) + 0.01 * i << "," << 0.1 * (i % 7) << ","
            << y << "\n";
    }
}

void write_predictions_csv(const std::string& path, bool with_group = false,
                           bool with_comparator = false) {
    std::ofstream out(path);
    out << "prob" << (with_group ? ",group" : "")
        << (with_comparator ? ",assay" : "") << ",label\n";
    for (int i = 0; i < 100; ++i) {
        const double p = 0.005 + 0.99 * i / 99.0;
        const int y = (i * 37 % 100) < 100 * p ? 1 : 0;
        out << p;
        if (with_group) out << "," << i % 2;
        if (with_comparator) out << "," << (p > 0.5 ? 1 : 0);
        out << "," << y << "\n";
    }
}

json load_report(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                  std::vector<std::string>& header) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    REQUIRE(std::getline(in, line));
    std::stringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) header.push_back(tok);
    std::vector<std::vector<double>> cols(header.size());
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::size_t c = 0;
        while (std::getline(ls, tok, ',')) cols.at(c++).push_back(std::stod(tok));
    }
    return cols;
}

}  // namespace

TEST_CASE("version and usage") {
    CHECK(run("--version") == 0);
    std::ifstream out("cli_stdout.txt");
    std::string line;
    std::getline(out, line);
    CHECK(line.find("schema_version") != std::string::npos);

    CHECK(run("") == 1);                  // no subcommand: help + usage error
    CHECK(run("--no-such-flag") == 1);    // parse error
}

TEST_CASE("train emits a model and a report") {
    TempDir dir;
    write_data_csv(dir.str("data.csv"));
    REQUIRE(run("train --input " + dir.str("data.csv") + " --out " + dir.str() +
                " --seed 4 --epochs 30 --lr 0.3") == 0);
    CHECK(fs::exists(dir.path / "model.json"));
    const auto rep = load_report(dir.str("report.json"));
    CHECK(rep.at("schema_version") == 1);
    CHECK(rep.at("seed") == 4);
    CHECK(rep.at("scalars").at("train_accuracy").get<double>() > 0.9);
    CHECK(rep.contains("timestamp"));
}

TEST_CASE("identical invocations give identical reports modulo timestamp") {
    TempDir dir;
    write_predictions_csv(dir.str("preds.csv"));
    const std::string invocation = "calibrate --input " + dir.str("preds.csv") +
                                   " --out " + dir.str() + " --seed 9";
    REQUIRE(run(invocation) == 0);
    auto ra = load_report(dir.str("report.json"));
    REQUIRE(run(invocation) == 0);
    auto rb = load_report(dir.str("report.json"));
    ra.erase("timestamp");
    rb.erase("timestamp");
    CHECK(ra.dump() == rb.dump());
}

TEST_CASE("dca curve file round-trips against the in-memory curve") {
    TempDir dir;
    write_predictions_csv(dir.str("preds.csv"), false, true);
    REQUIRE(run("dca --input " + dir.str("preds.csv") + " --out " + dir.str()) ==
            0);

    std::vector<std::string> header;
    const auto cols = read_csv_columns(dir.str("decision_curve.csv"), header);
    REQUIRE(header == std::vector<std::string>{"threshold", "nb_model", "nb_all",
                                               "nb_none", "assay"});
    for (double v : cols[3]) CHECK(v == 0.0);  // treat-none identically zero

    // Recompute in process from the same predictions; parsed doubles must
    // match exactly (17 significant digits round-trip).
    clinaudit::PredictionSet preds;
    std::map<std::string, std::vector<int>> comparators;
    {
        std::vector<std::string> ph;
        const auto pcols = read_csv_columns(dir.str("preds.csv"), ph);
        preds.probs = pcols[0];
        for (double v : pcols[2]) preds.labels.push_back(v == 1.0 ? 1 : 0);
        std::vector<int> assay;
        for (double v : pcols[1]) assay.push_back(v == 1.0 ? 1 : 0);
        comparators["assay"] = assay;
    }
    const auto curve = clinaudit::decision_curve(preds, {}, comparators);
    REQUIRE(cols[0].size() == curve.thresholds.size());
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        CHECK(cols[0][i] == curve.thresholds[i]);
        CHECK(cols[1][i] == curve.nb_model[i]);
        CHECK(cols[2][i] == curve.nb_treat_all[i]);
        CHECK(cols[4][i] == curve.comparators.at("assay")[i]);
    }
}

TEST_CASE("stratified validate reports four positives per fold") {
    TempDir dir;
    write_data_csv(dir.str("data.csv"));
    REQUIRE(run("validate --input " + dir.str("data.csv") + " --out " +
                dir.str() + " --k 5 --stratified --epochs 10 --lr 0.3 "
                "--seed 3") == 0);
    const auto rep = load_report(dir.str("report.json"));
    const auto folds = rep.at("config").at("folds");
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) {
        CHECK(f.at("fold_positives") == 4);
        CHECK(f.at("fold_size") == 20);
    }
    CHECK(rep.at("scalars").contains("mean_auc"));
    CHECK(rep.at("scalars").contains("pooled_auc"));
}

TEST_CASE("fairness subcommand reports gaps per group") {
    TempDir dir;
    write_predictions_csv(dir.str("preds.csv"), true);
    REQUIRE(run("fairness --input " + dir.str("preds.csv") + " --out " +
                dir.str()) == 0);
    const auto rep = load_report(dir.str("report.json"));
    CHECK(rep.at("scalars").contains("spd"));
    CHECK(rep.at("scalars").contains("separation_gap"));
    CHECK(rep.at("config").at("per_group").size() == 2);
}

TEST_CASE("explain writes an attribution csv") {
    TempDir dir;
    write_data_csv(dir.str("data.csv"));
    REQUIRE(run("train --input " + dir.str("data.csv") + " --out " + dir.str() +
                " --seed 1 --epochs 30 --lr 0.3") == 0);
    REQUIRE(run("explain --input " + dir.str("data.csv") + " --model " +
                dir.str("model.json") + " --out " + dir.str() + " --seed 1") ==
            0);
    std::vector<std::string> header;
    std::ifstream in(dir.str("attribution.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "feature,value");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("fedsim writes a round log") {
    TempDir dir;
    write_data_csv(dir.str("data.csv"));
    REQUIRE(run("fedsim --input " + dir.str("data.csv") + " --out " + dir.str() +
                " --clients 2 --rounds 3 --seed 2 --lr 0.3") == 0);
    std::ifstream in(dir.str("rounds.jsonl"));
    std::string line;
    std::size_t rounds = 0;
    while (std::getline(in, line)) {
        CHECK(json::parse(line).at("round") == rounds);
        ++rounds;
    }
    CHECK(rounds == 3);
    const auto rep = load_report(dir.str("report.json"));
    CHECK(rep.at("scalars").contains("final_accuracy"));
}

TEST_CASE("attack fgsm emits adversarial rows and a success rate") {
    TempDir dir;
    write_data_csv(dir.str("data.csv"));
    REQUIRE(run("train --input " + dir.str("data.csv") + " --out " + dir.str() +
                " --seed 1 --epochs 30 --lr 0.3") == 0);
    REQUIRE(run("attack fgsm --input " + dir.str("data.csv") + " --model " +
                dir.str("model.json") + " --out " + dir.str() +
                " --eps 0.3") == 0);
    const auto rep = load_report(dir.str("report.json"));
    CHECK(rep.at("scalars").contains("success_rate"));
    std::ifstream in(dir.str("adversarial.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);  // header
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 100);
}

TEST_CASE("report merge prefixes scalars by source file") {
    TempDir dir;
    write_predictions_csv(dir.str("preds.csv"));
    const std::string a = dir.str("a"), b = dir.str("b");
    REQUIRE(run("calibrate --input " + dir.str("preds.csv") + " --out " + a) == 0);
    REQUIRE(run("dca --input " + dir.str("preds.csv") + " --out " + b) == 0);
    fs::copy_file(a + "/report.json", dir.str("cal.json"));
    fs::copy_file(b + "/report.json", dir.str("dca.json"));
    REQUIRE(run("report --out " + dir.str() + " --merge " + dir.str("cal.json") +
                " " + dir.str("dca.json")) == 0);
    const auto merged = load_report(dir.str("merged_report.json"));
    CHECK(merged.at("scalars").contains("cal.ece"));
    CHECK(merged.at("scalars").contains("dca.prevalence"));
}

TEST_CASE("config file values are overridden by explicit flags") {
    TempDir dir;
    write_predictions_csv(dir.str("preds.csv"));
    {
        std::ofstream cfg(dir.str("cfg.json"));
        cfg << R"({"bins": 5, "seed": 42})" << "\n";
    }
    REQUIRE(run("calibrate --input " + dir.str("preds.csv") + " --out " +
                dir.str() + " --config " + dir.str("cfg.json")) == 0);
    auto rep = load_report(dir.str("report.json"));
    CHECK(rep.at("seed") == 42);
    CHECK(rep.at("config").at("bins") == 5);

    REQUIRE(run("calibrate --input " + dir.str("preds.csv") + " --out " +
                dir.str() + " --config " + dir.str("cfg.json") +
                " --seed 7") == 0);
    rep = load_report(dir.str("report.json"));
    CHECK(rep.at("seed") == 7);
    CHECK(rep.at("config").at("bins") == 5);
}

TEST_CASE("exit codes distinguish data and numeric failures") {
    TempDir dir;
    SECTION("missing input file is a data error") {
        CHECK(run("dca --input does_not_exist.csv --out " + dir.str()) == 2);
    }
    SECTION("constant predictions make calibration numerically degenerate") {
        std::ofstream out(dir.str("flat.csv"));
        out << "prob,label\n";
        for (int i = 0; i < 20; ++i) out << "0.5," << i % 2 << "\n";
        out.close();
        CHECK(run("calibrate --input " + dir.str("flat.csv") + " --out " +
                  dir.str()) == 3);
    }
}
