#include "catch_amalgamated.hpp"

#include <cmath>
#include <functional>

#include "clinaudit/attacks.hpp"
#include "clinaudit/dataset.hpp"

using namespace clinaudit;

namespace {

Model logistic_with(const std::vector<double>& weights, double bias) {
    Model m;
    m.kind = ModelKind::Logistic;
    m.arch.input_dim = weights.size();
    m.params = weights;
    m.params.push_back(bias);
    m.trained = true;
    return m;
}

Dataset synth(std::size_t n, std::uint64_t seed, std::size_t d = 2) {
    SyntheticSpec spec;
    spec.n = n;
    spec.d = d;
    spec.true_weights.assign(d, 1.5);
    spec.true_weights[0] = -1.5;
    spec.seed = seed;
    return gen_synthetic(spec);
}

double example_loss(const Model& m, const double* x, int y) {
    const double p = std::clamp(predict_proba(m, x), kProbClamp,
                                1.0 - kProbClamp);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace

TEST_CASE("membership inference on an overfit model leaks") {
    // Tiny training set, wide MLP, many epochs: the classic overfit target.
    const Dataset members = synth(100, 1);
    const Dataset non_members = synth(100, 2);
    const Dataset shadow_pool = synth(800, 3);

    Architecture arch;
    arch.input_dim = 2;
    arch.hidden = {16};
    TrainConfig cfg{0.5, 300, 16, 0.0, 1};
    const Model target = train(members, arch, cfg);

    MiaSetup setup;
    setup.shadow_arch = arch;
    setup.shadow_cfg = cfg;
    setup.seed = 5;
    const auto result = mia_shadow_attack(target, setup, members, non_members,
                                          shadow_pool);
    CHECK(result.attack_auc >= 0.55);
    CHECK(result.advantage >= 0.0);
    CHECK(result.advantage <= 1.0);
    CHECK(result.membership_scores.size() == 200);
}

TEST_CASE("membership inference on unseen rows sits at chance") {
    // The "members" were never part of target training, so member and
    // non-member attack features are exchangeable.
    const Dataset train_ds = synth(2000, 11);
    const Dataset fake_members = synth(1000, 12);
    const Dataset non_members = synth(1000, 13);
    const Dataset shadow_pool = synth(800, 14);

    Architecture arch;
    arch.input_dim = 2;
    TrainConfig cfg{0.3, 10, 32, 0.01, 11};
    const Model target = train(train_ds, arch, cfg);

    MiaSetup setup;
    setup.shadow_arch = arch;
    setup.shadow_cfg = cfg;
    setup.seed = 6;
    const auto result = mia_shadow_attack(target, setup, fake_members,
                                          non_members, shadow_pool);
    CHECK(result.attack_auc == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("mia input validation") {
    const Dataset small = synth(8, 1);
    const Model target = logistic_with({1.0, 1.0}, 0.0);
    MiaSetup setup;
    setup.shadow_arch.input_dim = 2;
    CHECK_THROWS_AS(mia_shadow_attack(target, setup, small, small, small),
                    DataError);
    setup.shadow_count = 0;
    CHECK_THROWS_AS(mia_shadow_attack(target, setup, small, small, small),
                    DataError);
}

TEST_CASE("fgsm hand example") {
    // w=(1,-2), x=(0,0), y=1: p=0.5, input gradient (p-y)*w = (-0.5, 1).
    const Model m = logistic_with({1.0, -2.0}, 0.0);
    const auto adv = fgsm(m, {0.0, 0.0}, 1, 0.1);
    CHECK(adv[0] == Catch::Approx(-0.1));
    CHECK(adv[1] == Catch::Approx(0.1));

    SECTION("eps zero is the identity") {
        CHECK(fgsm(m, {0.3, -0.4}, 1, 0.0) == std::vector<double>{0.3, -0.4});
    }

    SECTION("loss never decreases for a linear model") {
        Rng rng(4);
        for (int i = 0; i < 50; ++i) {
            const Model lm = logistic_with({rng.normal(), rng.normal()},
                                           rng.normal());
            const std::vector<double> x = {rng.normal(), rng.normal()};
            const int y = rng.uniform() < 0.5 ? 0 : 1;
            const auto adv = fgsm(lm, x, y, 0.2);
            CHECK(example_loss(lm, adv.data(), y) >=
                  example_loss(lm, x.data(), y) - 1e-12);
        }
    }

    SECTION("domain bounds are clamped") {
        const auto bounded = fgsm(m, {0.0, 0.95}, 1, 0.1, {-0.05, 1.0});
        CHECK(bounded[0] == Catch::Approx(-0.05));
        CHECK(bounded[1] == Catch::Approx(1.0));
    }

    SECTION("trees and negative eps rejected") {
        Dataset ds;
        ds.n = 4;
        ds.d = 1;
        ds.features = {1, 2, 3, 4};
        ds.labels = {0, 0, 1, 1};
        const Model tree = train_tree(ds, 2, 1);
        CHECK_THROWS_AS(fgsm(tree, {1.0}, 1, 0.1), NumericError);
        CHECK_THROWS_AS(fgsm(m, {0.0, 0.0}, 1, -0.1), DataError);
    }
}

TEST_CASE("pgd") {
    Architecture arch;
    arch.input_dim = 2;
    arch.hidden = {6};
    const Dataset ds = synth(150, 21);
    TrainConfig cfg{0.3, 60, 16, 0.0, 21};
    const Model mlp = train(ds, arch, cfg);

    SECTION("one step with alpha = eps equals fgsm") {
        for (std::size_t i = 0; i < 20; ++i) {
            const std::vector<double> x = {ds.at(i, 0), ds.at(i, 1)};
            const auto a = fgsm(mlp, x, ds.labels[i], 0.15);
            const auto b = pgd(mlp, x, ds.labels[i], 0.15, 0.15, 1);
            CHECK(a == b);
        }
    }

    SECTION("output respects the eps ball and domain bounds") {
        for (std::size_t i = 0; i < 30; ++i) {
            // Start points must lie inside the domain or the ball and domain
            // constraints contradict each other.
            const std::vector<double> x = {std::clamp(ds.at(i, 0), -2.0, 2.0),
                                           std::clamp(ds.at(i, 1), -2.0, 2.0)};
            const auto adv = pgd(mlp, x, ds.labels[i], 0.2, 0.07, 15,
                                 {-2.0, 2.0});
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(std::fabs(adv[j] - x[j]) <= 0.2 + 1e-15);
                CHECK(adv[j] >= -2.0);
                CHECK(adv[j] <= 2.0);
            }
        }
    }

    SECTION("pgd matches or beats fgsm on average (directional)") {
        double fgsm_total = 0.0, pgd_total = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const Dataset tr = synth(150, 100 + seed);
            TrainConfig c{0.3, 60, 16, 0.0, seed};
            const Model m = train(tr, arch, c);
            const Dataset victims = synth(60, 200 + seed);
            std::vector<std::vector<double>> f_adv, p_adv;
            for (std::size_t i = 0; i < victims.n; ++i) {
                const std::vector<double> x = {victims.at(i, 0),
                                               victims.at(i, 1)};
                f_adv.push_back(fgsm(m, x, victims.labels[i], 0.25));
                p_adv.push_back(pgd(m, x, victims.labels[i], 0.25, 0.05, 20));
            }
            fgsm_total += evasion_success_rate(m, victims, f_adv);
            pgd_total += evasion_success_rate(m, victims, p_adv);
        }
        CHECK(pgd_total >= fgsm_total - 1e-12);
    }
}

TEST_CASE("zoo gradient estimation") {
    SECTION("quadratic is exact under central differences") {
        const auto f = [](const std::vector<double>& x) {
            return x[0] * x[0];
        };
        const auto est = zoo_gradient(f, {1.0}, 0.01);
        CHECK(est.gradient[0] == Catch::Approx(2.0).margin(1e-10));
        CHECK_FALSE(est.underflow_warning);
    }

    SECTION("error shrinks at second order on a logistic loss") {
        const Model m = logistic_with({1.3, -0.8}, 0.4);
        const std::vector<double> x = {0.7, -0.2};
        const auto analytic = input_gradient(m, x.data(), 1);
        const auto q = loss_query(m, 1);

        const auto err = [&](double h) {
            const auto est = zoo_gradient(q, x, h);
            double e = 0.0;
            for (std::size_t j = 0; j < 2; ++j)
                e = std::max(e, std::fabs(est.gradient[j] - analytic[j]));
            return e;
        };
        const double ratio = err(0.2) / err(0.1);
        CHECK(ratio == Catch::Approx(4.0).margin(1.0));
    }

    SECTION("constant query gives zero gradient with a warning") {
        const auto f = [](const std::vector<double>&) { return 3.0; };
        const auto est = zoo_gradient(f, {1.0, 2.0}, 1e-3);
        CHECK(est.gradient == std::vector<double>{0.0, 0.0});
        CHECK(est.underflow_warning);
    }

    SECTION("non-positive h rejected") {
        const auto f = [](const std::vector<double>&) { return 0.0; };
        CHECK_THROWS_AS(zoo_gradient(f, {1.0}, 0.0), DataError);
    }
}

TEST_CASE("evasion success rate") {
    const Model m = logistic_with({5.0}, 0.0);
    Dataset ds;
    ds.n = 4;
    ds.d = 1;
    ds.features = {1.0, -1.0, 2.0, -2.0};
    ds.labels = {1, 0, 1, 0};
    std::vector<std::vector<double>> adv = {{-1.0}, {1.0}, {2.0}, {-2.0}};
    CHECK(evasion_success_rate(m, ds, adv) == Catch::Approx(0.5));
    adv.pop_back();
    CHECK_THROWS_AS(evasion_success_rate(m, ds, adv), DataError);
}

TEST_CASE("defense comparison") {
    AttackResult base;
    base.attack_auc = 0.7;
    base.success_rate = 0.4;
    base.config_tag = "mia:S=4:f=2";

    SECTION("identical results give zero deltas") {
        const auto cmp = evaluate_defense(base, base);
        CHECK(cmp.auc_delta == 0.0);
        CHECK(cmp.success_delta == 0.0);
    }

    SECTION("effective defense yields negative deltas") {
        AttackResult defended = base;
        defended.attack_auc = 0.55;
        defended.success_rate = 0.1;
        const auto cmp = evaluate_defense(base, defended);
        CHECK(cmp.auc_delta == Catch::Approx(-0.15));
        CHECK(cmp.success_delta == Catch::Approx(-0.3));
    }

    SECTION("mismatched configurations rejected") {
        AttackResult other = base;
        other.config_tag = "mia:S=8:f=2";
        CHECK_THROWS_AS(evaluate_defense(base, other), DataError);
    }
}

TEST_CASE("softplus smoothing lowers fgsm success (directional)") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset tr = synth(150, 300 + seed);
        const Dataset victims = synth(60, 400 + seed);
        TrainConfig cfg{0.3, 60, 16, 0.0, seed};

        Architecture relu;
        relu.input_dim = 2;
        relu.hidden = {8};
        Architecture soft = relu;
        soft.activation.kind = ActivationKind::Softplus;
        soft.activation.beta = 1.0;

        const Model m_relu = train(tr, relu, cfg);
        const Model m_soft = train(tr, soft, cfg);
        auto attack = [&](const Model& m) {
            std::vector<std::vector<double>> adv;
            for (std::size_t i = 0; i < victims.n; ++i) {
                const std::vector<double> x = {victims.at(i, 0),
                                               victims.at(i, 1)};
                adv.push_back(fgsm(m, x, victims.labels[i], 0.2));
            }
            return evasion_success_rate(m, victims, adv);
        };
        if (attack(m_soft) <= attack(m_relu)) ++wins;
    }
    CHECK(wins >= 6);
}
