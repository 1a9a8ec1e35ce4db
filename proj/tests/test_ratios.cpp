#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "misspec/errors.hpp"
#include "misspec/ratios.hpp"

using namespace misspec;

namespace {

Point p1(double x) { return Point::Constant(1, x); }

GaussianModel matern(double sigma, double nu, double kappa, MeanSpec mean = MeanSpec::zero()) {
    return GaussianModel::from_spec({mean, {MaternSpec{{sigma, nu, kappa, 1}, Domain::box(1)}, 1.0}, "m"});
}

Design grid(int n) {
    std::vector<Point> s;
    for (int i = 1; i <= n; ++i) {
        s.push_back(p1(static_cast<double>(i) / (n + 1)));
    }
    return Design(s);
}

std::vector<NamedTarget> targets(std::initializer_list<double> xs) {
    std::vector<NamedTarget> out;
    int i = 0;
    for (double x : xs) {
        out.push_back({"t" + std::to_string(i++), TargetFunctional::point(p1(x))});
    }
    return out;
}

}  // namespace

TEST_CASE("identical models give unit ratios and a zero mean term") {
    const auto m = matern(1, 0.5, 1);
    const auto set = efficiency_ratios(grid(10), targets({0.03, 0.33, 0.5, 0.97}), m, m, {1.0});
    REQUIRE(set.records.size() == 5);
    for (const auto& rec : set.records) {
        for (RatioName r : kAllRatios) {
            CHECK(rec[r].value == (r == RatioName::MeanTerm ? 0.0 : 1.0));
        }
    }
    CHECK(set.records.back().is_sup());
    CHECK_FALSE(set.records.back().moments.has_value());
}

TEST_CASE("a scaled kernel reproduces the scale in r_3 and r_4 only") {
    const auto m = matern(1, 1.5, 2);
    const auto m4 = matern(2, 1.5, 2);
    const auto set = efficiency_ratios(grid(7), targets({0.11, 0.5, 0.93}), m, m4, {4.0});
    for (const auto& rec : set.records) {
        CHECK(rec[RatioName::RVar1].value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rec[RatioName::RVar2].value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rec[RatioName::RVar3].value == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(rec[RatioName::RVar4].value == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(rec[RatioName::RVar3].abs_dev() < 1e-10);
    }
}

TEST_CASE("ratio invariants hold for randomly drawn model pairs") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> sig(0.5, 2.0);
    std::uniform_real_distribution<double> kap(0.3, 3.0);
    std::uniform_int_distribution<int> nus(0, 2);
    const double nu_values[] = {0.5, 1.5, 2.5};
    for (int trial = 0; trial < 30; ++trial) {
        const auto truth = matern(sig(rng), nu_values[nus(rng)], kap(rng));
        const auto wrong = matern(sig(rng), nu_values[nus(rng)], kap(rng), MeanSpec::constant(sig(rng) - 1.0));
        const auto set = efficiency_ratios(grid(12), targets({0.02, 0.2, 0.41, 0.77, 0.99}), truth, wrong);
        for (const auto& rec : set.records) {
            const auto bad = check_record_invariants(rec);
            CHECK_MESSAGE(bad.empty(), (bad.empty() ? "" : bad.front()));
        }
    }
}

TEST_CASE("the SUP record holds the worst deviation per ratio") {
    const auto set = efficiency_ratios(grid(6), targets({0.02, 0.3, 0.55, 0.99}), matern(1, 0.5, 1),
                                       matern(2, 0.5, 0.5), {2.0});
    const auto& sup = set.records.back();
    for (RatioName r : kAllRatios) {
        double worst = -1.0;
        for (std::size_t i = 0; i + 1 < set.records.size(); ++i) {
            const auto& v = set.records[i][r];
            worst = std::max(worst, v.limit ? v.abs_dev() : v.value);
        }
        CHECK((sup[r].limit ? sup[r].abs_dev() : sup[r].value) == worst);
    }
    // without a known a, r_3 and r_4 carry no limit and SUP keeps the largest value
    const auto free = efficiency_ratios(grid(6), targets({0.02, 0.3}), matern(1, 0.5, 1), matern(2, 0.5, 0.5));
    CHECK_FALSE(free.records.back()[RatioName::RVar3].limit.has_value());
    CHECK(std::isnan(free.records.back()[RatioName::RVar3].abs_dev()));
}

TEST_CASE("targets with vanishing kriging variance are excluded") {
    const auto m = matern(1, 0.5, 1);
    const Design d = grid(4);
    const auto set = efficiency_ratios(d, {{"on_site", TargetFunctional::point(d[1])},
                                           {"free", TargetFunctional::point(p1(0.5))}},
                                       m, m);
    CHECK(set.records.size() == 2);
    CHECK(set.warnings.size() == 1);
    CHECK_THROWS_AS(efficiency_ratios(d, {{"on_site", TargetFunctional::point(d[1])}}, m, m), NumericalError);
}

TEST_CASE("mean term has a closed form for one site") {
    for (double dist : {0.05, 0.25, 1.3}) {
        const Design d({p1(0.0)});
        const auto t = TargetFunctional::point(p1(dist));
        const double delta = 1.7;
        const double v = mean_term(d, t, matern(1, 0.5, 1), matern(1, 0.5, 1, MeanSpec::constant(delta)));
        const double e = std::exp(-dist);
        CHECK(std::abs(v - delta * delta * (1 - e) / (1 + e)) < 1e-12);
    }
}

TEST_CASE("ratio tables are independent of the worker count") {
    const auto truth = matern(1, 0.5, 1);
    const auto wrong = matern(2, 1.5, 0.5);
    const DesignSource designs = [](int n) { return grid(n); };
    const TargetSource tg = [](const Design&, int) { return targets({0.01, 0.333, 0.5, 0.8}); };
    const std::vector<int> schedule{4, 8, 16, 32};
    setenv("MISSPEC_KRIGE_THREADS", "1", 1);
    CHECK(worker_count() == 1);
    const auto a = ratio_convergence(truth, wrong, designs, tg, schedule);
    setenv("MISSPEC_KRIGE_THREADS", "4", 1);
    const auto b = ratio_convergence(truth, wrong, designs, tg, schedule);
    unsetenv("MISSPEC_KRIGE_THREADS");
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
        CHECK(a.levels[i].n == schedule[i]);
        for (std::size_t k = 0; k < a.levels[i].records.size(); ++k) {
            for (RatioName r : kAllRatios) {
                CHECK(a.levels[i].records[k][r].value == b.levels[i].records[k][r].value);
            }
        }
    }
}

TEST_CASE("a numerical failure truncates the table and is reported") {
    const auto m = matern(1, 0.5, 1);
    const DesignSource designs = [](int n) {
        if (n >= 16) {
            throw NumericalError("synthetic failure");
        }
        return grid(n);
    };
    const TargetSource tg = [](const Design&, int) { return targets({0.3}); };
    const auto table = ratio_convergence_partial(m, m, designs, tg, {4, 8, 16, 32});
    CHECK(table.levels.size() == 2);
    REQUIRE(table.failure.has_value());
    CHECK(table.failure->find("n=16") != std::string::npos);
    CHECK_THROWS_AS(ratio_convergence(m, m, designs, tg, {4, 8, 16}), NumericalError);
    CHECK_THROWS_AS(ratio_convergence(m, m, designs, tg, {8, 4}), InvalidArgument);
}
