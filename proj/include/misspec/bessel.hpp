#pragma once

namespace misspec {

enum class BesselOverflow {
    Throw,     // DomainError when K_nu(x) is not representable
    Saturate,  // return std::numeric_limits<double>::max() instead
};

/// Modified Bessel function of the second kind K_nu(x) for nu >= 0, x > 0.
///
/// Temme's series is used for x < 2 and Steed's continued fraction (Temme's
/// CF2) for x >= 2, both at the reduced order |mu| <= 1/2, followed by forward
/// recurrence up to nu. Relative accuracy is ~1e-14 on x in [1e-6, 50],
/// nu in [0, 10].
///
/// For tiny x and large nu the value overflows a double (roughly when
/// nu * log(2 / x) > 709); this is reported according to `overflow`.
double bessel_k(double nu, double x, BesselOverflow overflow = BesselOverflow::Throw);

namespace detail {

// gamma1(mu) = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu),
// gamma2(mu) = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2, for |mu| <= 1/2.
struct TemmeGammas {
    double gamma1;
    double gamma2;
    double inv_gamma_plus;   // 1/Gamma(1+mu)
    double inv_gamma_minus;  // 1/Gamma(1-mu)
};

TemmeGammas temme_gammas(double mu);

}  // namespace detail
}  // namespace misspec
