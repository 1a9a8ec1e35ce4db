#include <doctest.h>

#include <cfloat>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "misspec/bessel.hpp"
#include "misspec/errors.hpp"

using namespace misspec;

namespace {

double k_half(double x) { return std::sqrt(std::numbers::pi / (2 * x)) * std::exp(-x); }

}  // namespace

TEST_CASE("bessel_k matches the high-precision reference table") {
    std::ifstream in(std::string(MISSPEC_FIXTURES) + "/bessel_k_reference.csv");
    REQUIRE(in);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    double worst = 0.0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        double nu, x, ref;
        char c;
        ls >> nu >> c >> x >> c >> ref;
        const double got = bessel_k(nu, x);
        worst = std::max(worst, std::abs(got - ref) / ref);
        ++rows;
    }
    CHECK(rows == 275);
    CHECK(worst < 1e-12);
}

TEST_CASE("half-integer orders have closed forms") {
    for (int i = 0; i < 200; ++i) {
        const double x = std::pow(10.0, -4.0 + 5.0 * i / 199.0);
        const double k12 = k_half(x);
        CHECK(bessel_k(0.5, x) == doctest::Approx(k12).epsilon(1e-13));
        CHECK(bessel_k(1.5, x) == doctest::Approx(k12 * (1 + 1 / x)).epsilon(1e-13));
        CHECK(bessel_k(2.5, x) == doctest::Approx(k12 * (1 + 3 / x + 3 / (x * x))).epsilon(1e-13));
    }
}

TEST_CASE("three-term recurrence in the order holds across the series and fraction branches") {
    for (double nu : {0.3, 1.0, 2.7, 6.2}) {
        for (double x : {0.01, 0.5, 1.99, 2.0, 2.01, 7.0, 40.0}) {
            const double lhs = bessel_k(nu + 1, x);
            const double rhs = bessel_k(std::abs(nu - 1), x) + 2 * nu / x * bessel_k(nu, x);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("K_nu is positive and decreasing in x, increasing in nu") {
    for (double nu : {0.0, 0.5, 1.3, 4.0}) {
        double prev = INFINITY;
        for (double x = 0.05; x < 30; x *= 1.3) {
            const double k = bessel_k(nu, x);
            CHECK(k > 0.0);
            CHECK(k < prev);
            prev = k;
            CHECK(bessel_k(nu + 0.25, x) > k);
        }
    }
}

TEST_CASE("Temme gamma helpers agree with tgamma") {
    for (double mu = -0.5; mu <= 0.5; mu += 0.03125) {
        const auto g = detail::temme_gammas(mu);
        const double ip = 1.0 / std::tgamma(1 + mu);
        const double im = 1.0 / std::tgamma(1 - mu);
        CHECK(g.inv_gamma_plus == doctest::Approx(ip).epsilon(1e-14));
        CHECK(g.inv_gamma_minus == doctest::Approx(im).epsilon(1e-14));
        CHECK(g.gamma2 == doctest::Approx(0.5 * (im + ip)).epsilon(1e-14));
        if (std::abs(mu) > 0.1) {
            CHECK(g.gamma1 == doctest::Approx((im - ip) / (2 * mu)).epsilon(1e-12));
        }
    }
    CHECK(detail::temme_gammas(0.0).gamma1 == doctest::Approx(-0.5772156649015329).epsilon(1e-15));
}

TEST_CASE("bessel_k rejects invalid arguments and reports overflow") {
    CHECK_THROWS_AS(bessel_k(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(bessel_k(1.0, -1.0), DomainError);
    CHECK_THROWS_AS(bessel_k(-0.5, 1.0), DomainError);
    CHECK_THROWS_AS(bessel_k(1.0, NAN), DomainError);
    CHECK_THROWS_AS(bessel_k(50.0, 1e-10), DomainError);
    CHECK(bessel_k(50.0, 1e-10, BesselOverflow::Saturate) == DBL_MAX);
}
