#include <doctest.h>

#include <cmath>
#include <numbers>

#include "misspec/errors.hpp"
#include "misspec/harness.hpp"

using namespace misspec;

namespace {

Point p1(double x) { return Point::Constant(1, x); }

double min_distance_to(const Design& d, const Domain& dom, const Point& x) {
    double best = INFINITY;
    for (const auto& s : d.sites()) {
        best = std::min(best, dom.distance(s, x));
    }
    return best;
}

}  // namespace

TEST_CASE("equispaced grid excludes the endpoints") {
    const Design d = generate_design(DesignGenerator::grid(Domain::box(1)), 3);
    REQUIRE(d.size() == 3);
    CHECK(d[0][0] == 0.25);
    CHECK(d[1][0] == 0.5);
    CHECK(d[2][0] == 0.75);
    CHECK(generate_design(DesignGenerator::grid(Domain::box(2)), 9).size() == 9);
    CHECK_THROWS_AS(generate_design(DesignGenerator::grid(Domain::box(2)), 8), InvalidArgument);
}

TEST_CASE("design sizes are bounded") {
    const auto g = DesignGenerator::halton(Domain::box(1));
    CHECK_THROWS_AS(generate_design(g, 0), InvalidArgument);
    CHECK_THROWS_AS(generate_design(g, kMaxDesignSize + 1), InvalidArgument);
    CHECK(generate_design(g, kMaxDesignSize).size() == static_cast<std::size_t>(kMaxDesignSize));
}

TEST_CASE("accumulating designs are nested and contract toward x_star") {
    for (const auto& g : {DesignGenerator::accumulating(Domain::box(1), p1(0.37)),
                          DesignGenerator::accumulating(Domain::box(1), p1(0.37), 0.3, 0.2),
                          DesignGenerator::accumulating(Domain::torus(1), p1(0.05)),
                          DesignGenerator::accumulating(Domain::box(2), Point(Eigen::Vector2d(0.4, 0.6))),
                          DesignGenerator::accumulating(Domain::sphere(), Point(Eigen::Vector3d(0, 0.6, 0.8)))}) {
        const Design big = generate_design(g, 512);
        for (int n : {1, 3, 64, 100, 256}) {
            const Design small = generate_design(g, n);
            for (std::size_t i = 0; i < small.size(); ++i) {
                CHECK(small[i] == big[i]);
            }
        }
        double prev = INFINITY;
        for (int m = 0; m <= 9; ++m) {
            const int n = 1 << m;
            const double dist = min_distance_to(generate_design(g, n), g.domain, g.x_star);
            CHECK(dist == doctest::Approx(g.spread * std::pow(g.q, m)).epsilon(1e-12));
            CHECK(dist == doctest::Approx(g.accumulation_radius(n)).epsilon(1e-12));
            CHECK(dist < prev);
            prev = dist;
        }
        for (const auto& s : big.sites()) {
            CHECK(g.domain.contains(s));
        }
    }
}

TEST_CASE("accumulating designs keep filling the domain") {
    const Design d = generate_design(DesignGenerator::accumulating(Domain::box(1), p1(0.37)), 256);
    for (double x = 0.0; x <= 1.0; x += 0.01) {
        CHECK(min_distance_to(d, Domain::box(1), p1(x)) < 0.02);
    }
}

TEST_CASE("accumulating generator validation") {
    CHECK_THROWS_AS(generate_design(DesignGenerator::accumulating(Domain::box(1), p1(0.37), 1.0), 4), InvalidArgument);
    CHECK_THROWS_AS(generate_design(DesignGenerator::accumulating(Domain::box(1), p1(0.1)), 4), InvalidArgument);
    CHECK_THROWS_AS(generate_design(DesignGenerator::accumulating(Domain::box(1), p1(1.5)), 4), InvalidArgument);
}

TEST_CASE("Halton and Fibonacci designs") {
    const auto h = DesignGenerator::halton(Domain::box(2));
    const Design a = generate_design(h, 50);
    const Design b = generate_design(h, 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
    }
    const Design f2 = generate_design(DesignGenerator::fibonacci(), 2);
    CHECK(f2.min_pairwise_distance() > 0.0);
    CHECK(f2[0].dot(f2[1]) < -0.5);
    const Design f = generate_design(DesignGenerator::fibonacci(), 300);
    for (const auto& s : f.sites()) {
        CHECK(std::abs(s.norm() - 1.0) < 1e-14);
    }
    CHECK_THROWS_AS(generate_design({DesignGenerator::Kind::SphereFibonacci, Domain::box(1), {}, 0.5, 0.25}, 4),
                    InvalidArgument);
}

TEST_CASE("default targets avoid design sites") {
    const Scenario s = builtin_scenario("matern_same_nu");
    for (int n : {8, 64, 512}) {
        const Design d = generate_design(s.design, n);
        const auto targets = make_targets(s, d, n);
        CHECK(targets.size() >= 34);
        for (const auto& t : targets) {
            CHECK(min_distance_to(d, s.domain(), t.target.terms[0].first) > 1e-9);
        }
        CHECK(targets.back().id == "xstar-");
    }
    const Scenario sphere = builtin_scenario("sphere_legendre_vs_spde");
    const auto st = make_targets(sphere, generate_design(sphere.design, 16), 16);
    CHECK(st.size() == 33);
    CHECK(st.front().id == "t00");
}

TEST_CASE("built-in scenarios") {
    const auto names = builtin_scenario_names();
    CHECK(names.size() == 8);
    for (const auto& n : names) {
        CHECK_NOTHROW(builtin_scenario(n).validate());
    }
    CHECK_THROWS_AS(builtin_scenario("nope"), InvalidArgument);
    CHECK(*scenario_limit(builtin_scenario("matern_same_nu")) == 2.0);
    CHECK_FALSE(scenario_limit(builtin_scenario("matern_diff_nu")).has_value());
}

TEST_CASE("identical scenario gives a flat table of ones") {
    const auto res = run_scenario(builtin_scenario("identical"));
    CHECK_FALSE(res.failure.has_value());
    REQUIRE(res.table.levels.size() == 4);
    for (const auto& level : res.table.levels) {
        for (const auto& rec : level.records) {
            for (RatioName r : kAllRatios) {
                CHECK(rec[r].value == (r == RatioName::MeanTerm ? 0.0 : 1.0));
            }
        }
    }
    CHECK(res.conditioning.size() == 4);
}

TEST_CASE("runs are deterministic") {
    const Scenario s = builtin_scenario("matern_diff_nu");
    const auto a = run_scenario(s);
    const auto b = run_scenario(s);
    REQUIRE(a.table.levels.size() == b.table.levels.size());
    for (std::size_t i = 0; i < a.table.levels.size(); ++i) {
        const auto& la = a.table.levels[i].records;
        const auto& lb = b.table.levels[i].records;
        REQUIRE(la.size() == lb.size());
        for (std::size_t k = 0; k < la.size(); ++k) {
            CHECK(la[k].target_id == lb[k].target_id);
            for (RatioName r : kAllRatios) {
                CHECK(la[k][r].value == lb[k][r].value);
            }
        }
    }
}

TEST_CASE("true-model variances shrink along nested designs") {
    Scenario s = builtin_scenario("matern_same_nu");
    s.schedule = {8, 16, 32, 64, 128};
    const auto res = run_scenario(s);
    REQUIRE(res.table.levels.size() == 5);
    for (std::size_t i = 1; i < res.table.levels.size(); ++i) {
        for (const auto& rec : res.table.levels[i].records) {
            // xstar+ and xstar- move with n, the rest are fixed points
            if (rec.is_sup() || rec.target_id == "xstar+" || rec.target_id == "xstar-") {
                continue;
            }
            const RatioRecord* before = res.table.levels[i - 1].find(rec.target_id);
            if (before == nullptr) {
                continue;
            }
            CHECK(rec.moments->true_of_true.variance <= before->moments->true_of_true.variance + 1e-15);
        }
    }
    const double first = res.table.levels.front().find("xstar")->moments->true_of_true.variance;
    const double last = res.table.levels.back().find("xstar")->moments->true_of_true.variance;
    CHECK(last < first);
}

TEST_CASE("matern_same_nu approaches its limits") {
    const auto res = run_scenario(builtin_scenario("matern_same_nu"));
    const auto& lv = res.table.levels;
    CHECK(lv.back().sup()[RatioName::RVar1].abs_dev() < lv.front().sup()[RatioName::RVar1].abs_dev());
    for (std::size_t i = 1; i < lv.size(); ++i) {
        CHECK(lv[i].sup()[RatioName::RVar3].abs_dev() < lv[i - 1].sup()[RatioName::RVar3].abs_dev());
    }
    CHECK(res.report->spectral_verdict->kind == LimitKind::Converges);
}

TEST_CASE("sphere scenario reports the eigen-ratio limit") {
    Scenario s = builtin_scenario("sphere_legendre_vs_spde");
    s.schedule = {8, 16};
    DiagnosticBudget fast;
    fast.sphere_level = 2;
    const auto res = run_scenario(s, fast);
    REQUIRE(res.report.has_value());
    REQUIRE(res.report->eigen_verdict->kind == LimitKind::Converges);
    CHECK(std::abs(*res.report->eigen_verdict->a_estimate - 1 / (2 * std::numbers::pi)) < 1e-3);
}

TEST_CASE("scenario validation") {
    Scenario s = builtin_scenario("identical");
    s.schedule = {16, 8};
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s = builtin_scenario("identical");
    s.design = DesignGenerator::fibonacci();
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
}
