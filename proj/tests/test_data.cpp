#include "catch_amalgamated.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "clinaudit/dataset.hpp"

using namespace clinaudit;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& content) {
        path = "tmp_test_" + std::to_string(::rand()) + ".csv";
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv ingests values verbatim") {
    TempCsv f("a,b,label\n1.0,2.0,1\n3.5,-1.0,0\n0.0,0.25,1\n");
    const Dataset ds = load_csv(f.path);
    REQUIRE(ds.n == 3);
    REQUIRE(ds.d == 2);
    CHECK(ds.at(0, 0) == 1.0);
    CHECK(ds.at(1, 1) == -1.0);
    CHECK(ds.at(2, 1) == 0.25);
    CHECK(ds.labels == std::vector<int>{1, 0, 1});
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load_csv mean-imputes blanks per column") {
    TempCsv f("a,label\n1.0,0\n,1\n3.0,0\n");
    CsvOptions opt;
    opt.impute = ImputePolicy::Mean;
    const Dataset ds = load_csv(f.path, opt);
    CHECK(ds.at(1, 0) == Catch::Approx(2.0));  // mean of 1.0 and 3.0
}

TEST_CASE("load_csv error paths") {
    SECTION("missing file") {
        CHECK_THROWS_AS(load_csv("does_not_exist.csv"), DataError);
    }
    SECTION("non-binary label") {
        TempCsv f("a,label\n1.0,2\n");
        CHECK_THROWS_WITH(load_csv(f.path),
                          Catch::Matchers::ContainsSubstring("non-binary label"));
    }
    SECTION("non-numeric feature cell") {
        TempCsv f("a,label\nfoo,1\n");
        CHECK_THROWS_AS(load_csv(f.path), DataError);
    }
    SECTION("blank with impute=error") {
        TempCsv f("a,label\n,1\n");
        CHECK_THROWS_AS(load_csv(f.path), DataError);
    }
    SECTION("single class only warns") {
        TempCsv f("a,label\n1.0,1\n2.0,1\n");
        const Dataset ds = load_csv(f.path);
        REQUIRE_FALSE(ds.warnings.empty());
    }
}

TEST_CASE("load_csv reads optional group column") {
    TempCsv f("a,group,label\n1.0,0,1\n2.0,1,0\n");
    const Dataset ds = load_csv(f.path);
    REQUIRE(ds.has_group());
    CHECK(ds.group == std::vector<int>{0, 1});
    CHECK(ds.d == 1);
}

TEST_CASE("split_holdout sizes and determinism") {
    SyntheticSpec spec;
    spec.n = 10;
    spec.d = 1;
    spec.true_weights = {0.0};
    spec.seed = 7;
    const Dataset ds = gen_synthetic(spec);

    auto [train1, test1] = split_holdout(ds, 0.7, false, 42);
    CHECK(train1.n == 7);
    CHECK(test1.n == 3);

    auto [train2, test2] = split_holdout(ds, 0.7, false, 42);
    CHECK(train1.features == train2.features);
    CHECK(test1.labels == test2.labels);

    CHECK_THROWS_AS(split_holdout(ds, 0.0, false, 1), DataError);
    CHECK_THROWS_AS(split_holdout(ds, 1.0, false, 1), DataError);
}

TEST_CASE("stratified holdout preserves class proportions") {
    Dataset ds;
    ds.n = 100;
    ds.d = 1;
    for (std::size_t i = 0; i < 100; ++i) {
        ds.features.push_back(static_cast<double>(i));
        ds.labels.push_back(i < 20 ? 1 : 0);
    }
    ds.feature_names = {"x"};
    auto [train, test] = split_holdout(ds, 0.7, true, 3);
    CHECK(train.positives() == 14);
    CHECK(train.n == 70);
    CHECK(test.positives() == 6);
}

TEST_CASE("make_folds partitions and balances") {
    Dataset ds;
    ds.n = 10;
    ds.d = 1;
    for (std::size_t i = 0; i < 10; ++i) {
        ds.features.push_back(static_cast<double>(i));
        ds.labels.push_back(i % 2);
    }

    SECTION("plain fold sizes {3,3,2,2}") {
        const auto plan = make_folds(ds, 4, FoldMode::Plain, 1);
        std::map<std::size_t, std::size_t> sizes;
        for (std::size_t f : plan.assignments) sizes[f]++;
        std::multiset<std::size_t> observed;
        for (const auto& [f, s] : sizes) observed.insert(s);
        CHECK(observed == std::multiset<std::size_t>{2, 2, 3, 3});
    }

    SECTION("loocv gives singleton folds") {
        const auto plan = make_folds(ds, 0, FoldMode::Loocv, 1);
        CHECK(plan.k == 10);
        std::set<std::size_t> seen(plan.assignments.begin(),
                                   plan.assignments.end());
        CHECK(seen.size() == 10);
    }

    SECTION("k out of range") {
        CHECK_THROWS_AS(make_folds(ds, 11, FoldMode::Plain, 1), DataError);
        CHECK_THROWS_AS(make_folds(ds, 1, FoldMode::Plain, 1), DataError);
    }
}

TEST_CASE("stratified folds balance classes to within one") {
    Dataset ds;
    ds.n = 100;
    ds.d = 1;
    for (std::size_t i = 0; i < 100; ++i) {
        ds.features.push_back(static_cast<double>(i));
        ds.labels.push_back(i < 20 ? 1 : 0);
    }
    const auto plan = make_folds(ds, 5, FoldMode::Stratified, 9);
    for (std::size_t f = 0; f < 5; ++f) {
        std::size_t pos = 0, tot = 0;
        for (std::size_t i = 0; i < 100; ++i)
            if (plan.assignments[i] == f) {
                ++tot;
                pos += static_cast<std::size_t>(ds.labels[i]);
            }
        CHECK(pos == 4);
        CHECK(tot == 20);
    }
}

TEST_CASE("fold assignments are a partition (property)") {
    SyntheticSpec spec;
    spec.d = 2;
    spec.true_weights = {1.0, -1.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        spec.n = 17 + seed * 3;
        spec.seed = seed;
        const Dataset ds = gen_synthetic(spec);
        const std::size_t k = 2 + seed % 5;
        const auto plan = make_folds(
            ds, k, seed % 2 ? FoldMode::Stratified : FoldMode::Plain, seed);
        REQUIRE(plan.assignments.size() == ds.n);
        std::map<std::size_t, std::size_t> sizes;
        for (std::size_t f : plan.assignments) {
            REQUIRE(f < k);
            sizes[f]++;
        }
        REQUIRE(sizes.size() == k);  // no empty fold
        if (plan.stratified) {
            for (int cls : {0, 1}) {
                std::size_t n_c = 0;
                for (int y : ds.labels) n_c += (y == cls);
                for (std::size_t f = 0; f < k; ++f) {
                    std::size_t cnt = 0;
                    for (std::size_t i = 0; i < ds.n; ++i)
                        if (plan.assignments[i] == f && ds.labels[i] == cls)
                            ++cnt;
                    const double ideal =
                        static_cast<double>(n_c) / static_cast<double>(k);
                    REQUIRE(std::fabs(static_cast<double>(cnt) - ideal) <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("gen_synthetic basics") {
    SyntheticSpec spec;
    spec.n = 10000;
    spec.d = 3;
    spec.true_weights = {0.0, 0.0, 0.0};
    spec.seed = 11;

    SECTION("zero weights give rate near one half") {
        const Dataset ds = gen_synthetic(spec);
        const double rate =
            static_cast<double>(ds.positives()) / static_cast<double>(ds.n);
        CHECK(rate == Catch::Approx(0.5).margin(0.02));
    }

    SECTION("determinism") {
        const Dataset a = gen_synthetic(spec);
        const Dataset b = gen_synthetic(spec);
        CHECK(a.features == b.features);
        CHECK(a.labels == b.labels);
    }

    SECTION("large intercept saturates labels") {
        spec.n = 500;
        spec.intercept = 20.0;
        const Dataset ds = gen_synthetic(spec);
        CHECK(ds.positives() == ds.n);
    }

    SECTION("non-finite spec rejected") {
        spec.intercept = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(gen_synthetic(spec), DataError);
    }
}

TEST_CASE("gen_synthetic group shifts") {
    SyntheticSpec spec;
    spec.n = 4000;
    spec.d = 1;
    spec.true_weights = {0.0};
    spec.group_shift = {{0.0, -2.0}, {0.0, 2.0}};
    spec.seed = 5;
    const Dataset ds = gen_synthetic(spec);
    REQUIRE(ds.has_group());
    double rate[2] = {0.0, 0.0};
    double count[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < ds.n; ++i) {
        rate[ds.group[i]] += ds.labels[i];
        count[ds.group[i]] += 1.0;
    }
    CHECK(rate[0] / count[0] < 0.25);
    CHECK(rate[1] / count[1] > 0.75);
}
