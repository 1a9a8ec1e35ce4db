#include "misspec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "misspec/bessel.hpp"
#include "misspec/errors.hpp"

namespace misspec {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kUnitTol = 1e-10;

void require_unit(const Point& x, const char* who) {
    if (x.size() != 3 || std::abs(x.norm() - 1.0) > kUnitTol) {
        throw DomainError(std::string(who) + ": points must be unit vectors in R^3");
    }
}

double sphere_inner(const Point& x, const Point& x_prime, const char* who) {
    require_unit(x, who);
    require_unit(x_prime, who);
    return std::clamp(x.dot(x_prime), -1.0, 1.0);
}

// sum_l coefs[l] P_l(y) with the recurrence run alongside the sum.
double legendre_series(const std::vector<double>& coefs, double y) {
    double p_prev = 1.0;
    double p = y;
    double sum = coefs[0];
    if (coefs.size() > 1) {
        sum += coefs[1] * y;
    }
    for (std::size_t ell = 1; ell + 1 < coefs.size(); ++ell) {
        const double l = static_cast<double>(ell);
        const double p_next = ((2.0 * l + 1.0) * y * p - l * p_prev) / (l + 1.0);
        p_prev = p;
        p = p_next;
        sum += coefs[ell + 1] * p;
    }
    return sum;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

bool Domain::contains(const Point& x, double tol) const {
    if (x.size() != dim) {
        return false;
    }
    switch (kind) {
        case DomainKind::Box:
            return (x.array() >= lo - tol).all() && (x.array() <= hi + tol).all();
        case DomainKind::Torus:
            return (x.array() >= -tol).all() && (x.array() <= 1.0 + tol).all();
        case DomainKind::Sphere:
            return std::abs(x.norm() - 1.0) <= tol;
    }
    return false;
}

double Domain::distance(const Point& x, const Point& y) const {
    switch (kind) {
        case DomainKind::Box:
            return (x - y).norm();
        case DomainKind::Torus: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                double d = std::abs(x[i] - y[i]);
                d -= std::floor(d);
                d = std::min(d, 1.0 - d);
                s += d * d;
            }
            return std::sqrt(s);
        }
        case DomainKind::Sphere:
            return std::acos(std::clamp(x.dot(y), -1.0, 1.0));
    }
    return 0.0;
}

std::string Domain::name() const {
    switch (kind) {
        case DomainKind::Box:
            return "box[" + fmt(lo) + "," + fmt(hi) + "]^" + std::to_string(dim);
        case DomainKind::Torus:
            return "torus^" + std::to_string(dim);
        case DomainKind::Sphere:
            return "sphere2";
    }
    return "?";
}

// ---------------------------------------------------------------------------

void MaternParams::validate() const {
    if (!(sigma > 0.0) || !(nu > 0.0) || !(kappa > 0.0) || dim < 1) {
        throw InvalidArgument("MaternParams: sigma, nu, kappa must be positive and dim >= 1");
    }
}

double matern_cov(double r, const MaternParams& p) {
    if (!(r >= 0.0)) {
        throw DomainError("matern_cov: r must be nonnegative");
    }
    const double sigma2 = p.sigma * p.sigma;
    const double x = p.kappa * r;
    // Below this the product (kappa r)^nu K_nu(kappa r) is at its limit 2^(nu-1) Gamma(nu)
    // to double precision for every nu in range, and K_nu itself may overflow.
    if (r == 0.0 || x < 1e-300) {
        return sigma2;
    }
    const double k = bessel_k(p.nu, x, BesselOverflow::Saturate);
    if (k == std::numeric_limits<double>::max()) {
        return sigma2;
    }
    const double log_norm = (1.0 - p.nu) * std::log(2.0) - std::lgamma(p.nu);
    return sigma2 * std::exp(log_norm + p.nu * std::log(x)) * k;
}

double matern_spectral_density(const Eigen::VectorXd& omega, const MaternParams& p) {
    if (omega.size() != p.dim) {
        throw InvalidArgument("matern_spectral_density: omega has dimension " + std::to_string(omega.size()) +
                              ", expected " + std::to_string(p.dim));
    }
    const double half_d = 0.5 * p.dim;
    const double log_c = std::lgamma(p.nu + half_d) - std::lgamma(p.nu) - half_d * std::log(kPi);
    const double k2 = p.kappa * p.kappa;
    return std::exp(log_c + 2.0 * p.nu * std::log(p.kappa) - (p.nu + half_d) * std::log(k2 + omega.squaredNorm())) *
           p.sigma * p.sigma;
}

std::string to_string(LimitKind kind) {
    switch (kind) {
        case LimitKind::Converges:
            return "Converges";
        case LimitKind::DivergesToZero:
            return "DivergesToZero";
        case LimitKind::DivergesToInfinity:
            return "DivergesToInfinity";
        case LimitKind::Inconclusive:
            return "Inconclusive";
    }
    return "?";
}

AnalyticLimit matern_ratio_limit(const MaternParams& p, const MaternParams& p_tilde) {
    p.validate();
    p_tilde.validate();
    if (p.dim != p_tilde.dim) {
        throw InvalidArgument("matern_ratio_limit: dimension mismatch");
    }
    if (p_tilde.nu < p.nu) {
        return {LimitKind::DivergesToInfinity, std::nullopt};
    }
    if (p_tilde.nu > p.nu) {
        return {LimitKind::DivergesToZero, std::nullopt};
    }
    const double a = (p_tilde.sigma * p_tilde.sigma * std::pow(p_tilde.kappa, 2.0 * p.nu)) /
                     (p.sigma * p.sigma * std::pow(p.kappa, 2.0 * p.nu));
    return {LimitKind::Converges, a};
}

// ---------------------------------------------------------------------------

PeriodicSpectrum::PeriodicSpectrum(int dim, int truncation, const MassFunction& mass)
    : dim_(dim), truncation_(truncation), mass_(mass) {
    if (dim < 1 || truncation < 1) {
        throw InvalidArgument("PeriodicSpectrum: dim and truncation must be positive");
    }
    std::vector<std::vector<int>> half;
    std::vector<int> k(dim, -truncation);
    // Enumerate the cube [-K, K]^d and keep k = 0 plus indices whose first nonzero entry is positive.
    for (;;) {
        const auto first = std::find_if(k.begin(), k.end(), [](int v) { return v != 0; });
        if (first == k.end() || *first > 0) {
            half.push_back(k);
        }
        int i = dim - 1;
        while (i >= 0 && k[i] == truncation) {
            k[i] = -truncation;
            --i;
        }
        if (i < 0) {
            break;
        }
        ++k[i];
    }
    const auto shell = [](const std::vector<int>& v) {
        int m = 0;
        for (int c : v) {
            m = std::max(m, std::abs(c));
        }
        return m;
    };
    std::stable_sort(half.begin(), half.end(), [&](const auto& a, const auto& b) {
        const int sa = shell(a);
        const int sb = shell(b);
        return sa != sb ? sa < sb : a < b;
    });
    modes_.reserve(half.size());
    for (auto& v : half) {
        const double f = mass(v);
        if (!(f >= 0.0) || !std::isfinite(f)) {
            throw InvalidArgument("PeriodicSpectrum: spectral mass must be finite and nonnegative");
        }
        modes_.push_back({std::move(v), f});
    }
}

double PeriodicSpectrum::total_mass() const {
    double s = 0.0;
    for (const auto& m : modes_) {
        const bool zero = std::all_of(m.k.begin(), m.k.end(), [](int v) { return v == 0; });
        s += zero ? m.mass : 2.0 * m.mass;
    }
    return s;
}

PeriodicSpectrum PeriodicSpectrum::with_truncation(int truncation) const {
    return PeriodicSpectrum(dim_, truncation, mass_);
}

double periodic_cov(const Point& x, const Point& x_prime, const PeriodicSpectrum& s) {
    if (x.size() != s.dim() || x_prime.size() != s.dim()) {
        throw InvalidArgument("periodic_cov: point dimension mismatch");
    }
    const Eigen::VectorXd diff = x - x_prime;
    double sum = 0.0;
    for (const auto& m : s.modes()) {
        double phase = 0.0;
        bool zero = true;
        for (int i = 0; i < s.dim(); ++i) {
            phase += m.k[i] * diff[i];
            zero = zero && m.k[i] == 0;
        }
        sum += zero ? m.mass : 2.0 * m.mass * std::cos(2.0 * kPi * phase);
    }
    return sum;
}

// ---------------------------------------------------------------------------

double legendre_p(int ell, double y) {
    if (!(std::abs(y) <= 1.0)) {
        throw DomainError("legendre_p: |y| must be <= 1");
    }
    if (ell < 0) {
        throw DomainError("legendre_p: degree must be nonnegative");
    }
    if (ell == 0) {
        return 1.0;
    }
    double p_prev = 1.0;
    double p = y;
    for (int l = 1; l < ell; ++l) {
        const double p_next = ((2.0 * l + 1.0) * y * p - l * p_prev) / (l + 1.0);
        p_prev = p;
        p = p_next;
    }
    return p;
}

void SphereLegendreParams::validate() const {
    if (!(sigma1 > 0.0) || !(nu1 > 0.0) || !(kappa1 > 0.0) || l_max < 1) {
        throw InvalidArgument("SphereLegendreParams: parameters must be positive");
    }
}

double SphereLegendreParams::legendre_coefficient(int ell) const {
    const double l = ell;
    return sigma1 * sigma1 * std::pow(kappa1 * kappa1 + l * l, -(nu1 + 0.5));
}

double SphereLegendreParams::eigenvalue(int ell) const {
    return legendre_coefficient(ell) * 4.0 * kPi / (2.0 * ell + 1.0);
}

double SphereLegendreParams::tail_bound(int ell) const {
    // coefficient(l) <= sigma1^2 l^-(2 nu1 + 1), so the sum beyond M is at most
    // sigma1^2 M^(-2 nu1) / (2 nu1).
    const int m = 2 * ell + 2000;
    double s = 0.0;
    for (int l = m; l > ell; --l) {
        s += legendre_coefficient(l);
    }
    return s + sigma1 * sigma1 * std::pow(static_cast<double>(m), -2.0 * nu1) / (2.0 * nu1);
}

void SphereSpdeParams::validate() const {
    if (!(tau > 0.0) || !(nu > 0.0) || !(kappa > 0.0) || l_max < 1) {
        throw InvalidArgument("SphereSpdeParams: parameters must be positive");
    }
}

double SphereSpdeParams::eigenvalue(int ell) const {
    const double l = ell;
    return std::pow(kappa * kappa + l * (l + 1.0), -(nu + 1.0)) / (tau * tau);
}

double SphereSpdeParams::legendre_coefficient(int ell) const {
    return eigenvalue(ell) * (2.0 * ell + 1.0) / (4.0 * kPi);
}

double SphereSpdeParams::tail_bound(int ell) const {
    // (2l+1) / (l(l+1))^(nu+1) <= 2 l^-(2 nu + 1) for l >= 1, hence the remainder
    // beyond M is at most tau^-2 M^(-2 nu) / (4 pi nu).
    const int m = 2 * ell + 2000;
    double s = 0.0;
    for (int l = m; l > ell; --l) {
        s += legendre_coefficient(l);
    }
    return s + std::pow(static_cast<double>(m), -2.0 * nu) / (4.0 * kPi * nu * tau * tau);
}

double sphere_cov_legendre_matern(const Point& x, const Point& x_prime, const SphereLegendreParams& p) {
    p.validate();
    std::vector<double> coefs(p.l_max + 1);
    for (int l = 0; l <= p.l_max; ++l) {
        coefs[l] = p.legendre_coefficient(l);
    }
    return legendre_series(coefs, sphere_inner(x, x_prime, "sphere_cov_legendre_matern"));
}

double sphere_cov_spde(const Point& x, const Point& x_prime, const SphereSpdeParams& p) {
    p.validate();
    std::vector<double> coefs(p.l_max + 1);
    for (int l = 0; l <= p.l_max; ++l) {
        coefs[l] = p.legendre_coefficient(l);
    }
    return legendre_series(coefs, sphere_inner(x, x_prime, "sphere_cov_spde"));
}

double sphere_eigen_ratio(const SphereLegendreParams& p1, const SphereSpdeParams& p2, int ell) {
    if (ell < 0) {
        throw DomainError("sphere_eigen_ratio: degree must be nonnegative");
    }
    const double l = ell;
    const double num = std::pow(p1.kappa1 * p1.kappa1 + l * l, p1.nu1 + 0.5) * (2.0 * l + 1.0);
    const double den = std::pow(p2.kappa * p2.kappa + l * (l + 1.0), p2.nu + 1.0) * p2.tau * p2.tau *
                       p1.sigma1 * p1.sigma1 * 4.0 * kPi;
    return num / den;
}

AnalyticLimit sphere_eigen_ratio_limit(const SphereLegendreParams& p1, const SphereSpdeParams& p2) {
    if (p1.nu1 < p2.nu) {
        return {LimitKind::DivergesToZero, std::nullopt};
    }
    if (p1.nu1 > p2.nu) {
        return {LimitKind::DivergesToInfinity, std::nullopt};
    }
    return {LimitKind::Converges, 1.0 / (p2.tau * p2.tau * p1.sigma1 * p1.sigma1 * 2.0 * kPi)};
}

// ---------------------------------------------------------------------------

EigenSequence eigen_sequence_of(const PeriodicSpectrum& s) {
    EigenSequence seq;
    seq.label = "periodic d=" + std::to_string(s.dim()) + " K=" + std::to_string(s.truncation());
    seq.values.reserve(2 * s.modes().size());
    for (const auto& m : s.modes()) {
        const bool zero = std::all_of(m.k.begin(), m.k.end(), [](int v) { return v == 0; });
        seq.values.push_back(m.mass);
        if (!zero) {
            seq.values.push_back(m.mass);
        }
    }
    return seq;
}

namespace {

template <class Params>
EigenSequence sphere_sequence(const Params& p, std::string label) {
    EigenSequence seq;
    seq.label = std::move(label);
    seq.values.reserve(static_cast<std::size_t>(p.l_max + 1) * (p.l_max + 1));
    for (int l = 0; l <= p.l_max; ++l) {
        seq.values.insert(seq.values.end(), 2 * l + 1, p.eigenvalue(l));
    }
    return seq;
}

}  // namespace

EigenSequence eigen_sequence_of(const SphereLegendreParams& p) {
    p.validate();
    return sphere_sequence(p, "sphere legendre-matern L=" + std::to_string(p.l_max));
}

EigenSequence eigen_sequence_of(const SphereSpdeParams& p) {
    p.validate();
    return sphere_sequence(p, "sphere spde L=" + std::to_string(p.l_max));
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd CovarianceKernel::gram(std::span<const Point> sites) const {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            k(i, j) = (*this)(sites[i], sites[j]);
            k(j, i) = k(i, j);
        }
    }
    return k;
}

Eigen::VectorXd CovarianceKernel::cross(const Point& x, std::span<const Point> sites) const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(sites.size()));
    for (std::size_t i = 0; i < sites.size(); ++i) {
        c[static_cast<Eigen::Index>(i)] = (*this)(x, sites[i]);
    }
    return c;
}

MaternKernel::MaternKernel(MaternParams p, Domain domain) : p_(p), domain_(domain) {
    p_.validate();
    if (domain_.kind != DomainKind::Box || domain_.dim != p_.dim) {
        throw InvalidArgument("MaternKernel: requires a box domain of matching dimension");
    }
}

double MaternKernel::operator()(const Point& x, const Point& x_prime) const {
    return matern_cov((x - x_prime).norm(), p_);
}

std::string MaternKernel::describe() const {
    return "matern(sigma=" + fmt(p_.sigma) + ",nu=" + fmt(p_.nu) + ",kappa=" + fmt(p_.kappa) +
           ",d=" + std::to_string(p_.dim) + ")";
}

PeriodicKernel::PeriodicKernel(PeriodicSpectrum s) : s_(std::move(s)) {}

double PeriodicKernel::operator()(const Point& x, const Point& x_prime) const {
    return periodic_cov(x, x_prime, s_);
}

std::string PeriodicKernel::describe() const {
    return "periodic(d=" + std::to_string(s_.dim()) + ",K=" + std::to_string(s_.truncation()) + ")";
}

SphereLegendreMaternKernel::SphereLegendreMaternKernel(SphereLegendreParams p) : p_(p) {
    p_.validate();
    coefs_.resize(p_.l_max + 1);
    for (int l = 0; l <= p_.l_max; ++l) {
        coefs_[l] = p_.legendre_coefficient(l);
    }
}

double SphereLegendreMaternKernel::operator()(const Point& x, const Point& x_prime) const {
    return legendre_series(coefs_, sphere_inner(x, x_prime, "SphereLegendreMaternKernel"));
}

std::string SphereLegendreMaternKernel::describe() const {
    return "sphere_legendre_matern(sigma1=" + fmt(p_.sigma1) + ",nu1=" + fmt(p_.nu1) + ",kappa1=" + fmt(p_.kappa1) +
           ",L=" + std::to_string(p_.l_max) + ")";
}

SphereSpdeKernel::SphereSpdeKernel(SphereSpdeParams p) : p_(p) {
    p_.validate();
    coefs_.resize(p_.l_max + 1);
    for (int l = 0; l <= p_.l_max; ++l) {
        coefs_[l] = p_.legendre_coefficient(l);
    }
}

double SphereSpdeKernel::operator()(const Point& x, const Point& x_prime) const {
    return legendre_series(coefs_, sphere_inner(x, x_prime, "SphereSpdeKernel"));
}

std::string SphereSpdeKernel::describe() const {
    return "sphere_spde(tau=" + fmt(p_.tau) + ",nu=" + fmt(p_.nu) + ",kappa=" + fmt(p_.kappa) +
           ",L=" + std::to_string(p_.l_max) + ")";
}

GreatCircleMaternKernel::GreatCircleMaternKernel(MaternParams p) : p_(p) {
    p_.validate();
    if (p_.nu > 0.5) {
        throw InvalidArgument("GreatCircleMaternKernel: not positive definite for nu > 1/2");
    }
}

double GreatCircleMaternKernel::operator()(const Point& x, const Point& x_prime) const {
    return matern_cov(std::acos(sphere_inner(x, x_prime, "GreatCircleMaternKernel")), p_);
}

std::string GreatCircleMaternKernel::describe() const {
    return "great_circle_matern(sigma=" + fmt(p_.sigma) + ",nu=" + fmt(p_.nu) + ",kappa=" + fmt(p_.kappa) + ")";
}

ChordalMaternKernel::ChordalMaternKernel(MaternParams p) : p_(p) { p_.validate(); }

double ChordalMaternKernel::operator()(const Point& x, const Point& x_prime) const {
    require_unit(x, "ChordalMaternKernel");
    require_unit(x_prime, "ChordalMaternKernel");
    return matern_cov((x - x_prime).norm(), p_);
}

std::string ChordalMaternKernel::describe() const {
    return "chordal_matern(sigma=" + fmt(p_.sigma) + ",nu=" + fmt(p_.nu) + ",kappa=" + fmt(p_.kappa) + ")";
}

ConstantKernel::ConstantKernel(double c, Domain domain) : c_(c), domain_(domain) {
    if (!(c > 0.0)) {
        throw InvalidArgument("ConstantKernel: c must be positive");
    }
}

std::string ConstantKernel::describe() const { return "constant(" + fmt(c_) + ")"; }

ScaledKernel::ScaledKernel(double c, KernelPtr inner) : c_(c), inner_(std::move(inner)) {
    if (!(c > 0.0) || !inner_) {
        throw InvalidArgument("ScaledKernel: scale must be positive and the inner kernel set");
    }
}

double ScaledKernel::operator()(const Point& x, const Point& x_prime) const { return c_ * (*inner_)(x, x_prime); }

std::string ScaledKernel::describe() const { return fmt(c_) + "*" + inner_->describe(); }

MaternSpectralDensity::MaternSpectralDensity(MaternParams p, double scale) : p_(p), scale_(scale) {
    p_.validate();
    if (!(scale > 0.0)) {
        throw InvalidArgument("MaternSpectralDensity: scale must be positive");
    }
}

double MaternSpectralDensity::operator()(const Eigen::VectorXd& omega) const {
    return scale_ * matern_spectral_density(omega, p_);
}

}  // namespace misspec
