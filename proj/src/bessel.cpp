#include "misspec/bessel.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

// Taylor coefficients of 1/Gamma(z) = sum_k kRecipGamma[k] z^k around z = 0.
constexpr std::array<double, 29> kRecipGamma = {
    0.0,
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
    1.18669225475160033258e-18,
    1.412380655318031781556e-18,
};

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

struct KPair {
    double k_mu;
    double k_mu1;
};

// Temme's series, valid for 0 < x < 2 and |mu| <= 1/2.
KPair temme_series(double mu, double x) {
    const auto g = detail::temme_gammas(mu);
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    double ff = fact * (g.gamma1 * std::cosh(e) + g.gamma2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.inv_gamma_plus;
    double q = 0.5 / (e * g.inv_gamma_minus);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double di = i;
        ff = (di * ff + p + q) / (di * di - mu * mu);
        c *= d / di;
        p /= di - mu;
        q /= di + mu;
        const double del = c * ff;
        sum += del;
        sum1 += c * (p - di * ff);
        if (std::abs(del) < std::abs(sum) * kEps) {
            return {sum, sum1 * 2.0 / x};
        }
    }
    throw NumericalError("bessel_k: Temme series did not converge");
}

// Steed's algorithm for Temme's continued fraction CF2, valid for x >= 2.
KPair steed_cf2(double mu, double x) {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu * mu;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 1; i <= kMaxIter; ++i) {
        a -= 2 * i;
        c = -a * c / (i + 1.0);
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kEps) {
            h *= a1;
            const double k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
            const double k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
            return {k_mu, k_mu1};
        }
    }
    throw NumericalError("bessel_k: continued fraction did not converge");
}

}  // namespace

namespace detail {

TemmeGammas temme_gammas(double mu) {
    // 1/Gamma(1 + mu) = sum_{k>=1} c_k mu^{k-1}; split into even and odd parts.
    const double mu2 = mu * mu;
    double even = 0.0;  // c_1 + c_3 mu^2 + c_5 mu^4 + ...
    double odd = 0.0;   // c_2 + c_4 mu^2 + c_6 mu^4 + ...
    for (std::size_t k = kRecipGamma.size() - 1; k >= 1; --k) {
        if (k % 2 == 1) {
            even = even * mu2 + kRecipGamma[k];
        } else {
            odd = odd * mu2 + kRecipGamma[k];
        }
    }
    return {-odd, even, even + mu * odd, even - mu * odd};
}

}  // namespace detail

double bessel_k(double nu, double x, BesselOverflow overflow) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("bessel_k: x must be positive and finite, got " + std::to_string(x));
    }
    if (!(nu >= 0.0) || !std::isfinite(nu)) {
        throw DomainError("bessel_k: nu must be nonnegative, got " + std::to_string(nu));
    }
    const int steps = static_cast<int>(nu + 0.5);
    const double mu = nu - steps;
    auto [k_mu, k_mu1] = x < 2.0 ? temme_series(mu, x) : steed_cf2(mu, x);
    for (int i = 1; i <= steps; ++i) {
        const double next = (mu + i) * (2.0 / x) * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    if (!std::isfinite(k_mu)) {
        if (overflow == BesselOverflow::Saturate) {
            return std::numeric_limits<double>::max();
        }
        throw DomainError("bessel_k: K_nu(x) overflows for nu=" + std::to_string(nu) +
                          ", x=" + std::to_string(x));
    }
    return k_mu;
}

}  // namespace misspec
