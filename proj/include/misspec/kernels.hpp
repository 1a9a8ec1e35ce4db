#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace misspec {

using Point = Eigen::VectorXd;

enum class DomainKind {
    Box,    // [lo, hi]^dim with the Euclidean metric
    Torus,  // [0, 1)^dim, coordinates taken modulo 1
    Sphere, // unit sphere S^2 embedded in R^3
};

struct Domain {
    DomainKind kind = DomainKind::Box;
    int dim = 1;  // number of coordinates of a point (3 for the sphere)
    double lo = 0.0;
    double hi = 1.0;

    static Domain box(int dim, double lo = 0.0, double hi = 1.0) { return {DomainKind::Box, dim, lo, hi}; }
    static Domain torus(int dim) { return {DomainKind::Torus, dim, 0.0, 1.0}; }
    static Domain sphere() { return {DomainKind::Sphere, 3, -1.0, 1.0}; }

    [[nodiscard]] bool contains(const Point& x, double tol = 1e-10) const;
    // Distance used for design validity and accumulation: Euclidean on boxes,
    // wrapped per coordinate on the torus, great-circle angle on the sphere.
    [[nodiscard]] double distance(const Point& x, const Point& y) const;
    [[nodiscard]] std::string name() const;

    bool operator==(const Domain&) const = default;
};

// ---------------------------------------------------------------------------
// Matérn family on R^d

struct MaternParams {
    double sigma = 1.0;
    double nu = 0.5;
    double kappa = 1.0;
    int dim = 1;

    void validate() const;
    bool operator==(const MaternParams&) const = default;
};

/// sigma^2 / (2^(nu-1) Gamma(nu)) (kappa r)^nu K_nu(kappa r); sigma^2 at r = 0.
double matern_cov(double r, const MaternParams& p);

/// Gamma(nu + d/2) / (Gamma(nu) pi^(d/2)) * sigma^2 kappa^(2 nu) / (kappa^2 + |omega|^2)^(nu + d/2)
double matern_spectral_density(const Eigen::VectorXd& omega, const MaternParams& p);

enum class LimitKind { Converges, DivergesToZero, DivergesToInfinity, Inconclusive };

std::string to_string(LimitKind kind);

// Analytically known limit of a ratio sequence.
struct AnalyticLimit {
    LimitKind kind = LimitKind::Inconclusive;
    std::optional<double> a;  // present iff kind == Converges
};

/// Limit of f_tilde(omega) / f(omega) as |omega| -> infinity for two Matérn densities.
AnalyticLimit matern_ratio_limit(const MaternParams& p, const MaternParams& p_tilde);

// ---------------------------------------------------------------------------
// Weakly periodic fields on [0, 1)^d

/// Spectral mass f(k) on the integer lattice, truncated to max-norm <= truncation.
///
/// Modes are stored in the canonical eigen-ordering: k = 0 first, then shell by
/// shell in max-norm, and within a shell the indices whose first nonzero entry
/// is positive in lexicographic order. Each such k stands for the pair {k, -k}.
class PeriodicSpectrum {
public:
    using MassFunction = std::function<double(std::span<const int>)>;

    struct Mode {
        std::vector<int> k;
        double mass;
    };

    PeriodicSpectrum(int dim, int truncation, const MassFunction& mass);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int truncation() const { return truncation_; }
    [[nodiscard]] const std::vector<Mode>& modes() const { return modes_; }
    /// rho_0(0) = sum of f(k) over all retained k (both signs).
    [[nodiscard]] double total_mass() const;
    [[nodiscard]] PeriodicSpectrum with_truncation(int truncation) const;

private:
    int dim_;
    int truncation_;
    MassFunction mass_;
    std::vector<Mode> modes_;
};

/// sum_k f(k) cos(2 pi k . (x - x')) over the retained lattice.
double periodic_cov(const Point& x, const Point& x_prime, const PeriodicSpectrum& s);

// ---------------------------------------------------------------------------
// Sphere models

/// Legendre polynomial P_l(y) by the three-term recurrence.
double legendre_p(int ell, double y);

/// Legendre-Matérn model: coefficients sigma1^2 / (kappa1^2 + l^2)^(nu1 + 1/2).
struct SphereLegendreParams {
    double sigma1 = 1.0;
    double nu1 = 1.0;
    double kappa1 = 1.0;
    int l_max = 256;

    void validate() const;
    bool operator==(const SphereLegendreParams&) const = default;
    /// Coefficient of P_l in the covariance series.
    [[nodiscard]] double legendre_coefficient(int ell) const;
    /// Eigenvalue of the covariance operator on the degree-l spherical harmonics.
    [[nodiscard]] double eigenvalue(int ell) const;
    /// Rigorous upper bound on sum_{l > ell} |legendre_coefficient(l)|.
    [[nodiscard]] double tail_bound(int ell) const;
};

/// SPDE (Whittle-Matérn) model on S^2: eigenvalues tau^-2 / (kappa^2 + l(l+1))^(nu+1).
struct SphereSpdeParams {
    double tau = 1.0;
    double nu = 1.0;
    double kappa = 1.0;
    int l_max = 256;

    void validate() const;
    bool operator==(const SphereSpdeParams&) const = default;
    [[nodiscard]] double legendre_coefficient(int ell) const;
    [[nodiscard]] double eigenvalue(int ell) const;
    [[nodiscard]] double tail_bound(int ell) const;
};

double sphere_cov_legendre_matern(const Point& x, const Point& x_prime, const SphereLegendreParams& p);
double sphere_cov_spde(const Point& x, const Point& x_prime, const SphereSpdeParams& p);

/// Per-degree eigenvalue ratio lambda_spde(l) / lambda_legendre(l).
double sphere_eigen_ratio(const SphereLegendreParams& p1, const SphereSpdeParams& p2, int ell);

/// Limit of sphere_eigen_ratio as l -> infinity.
AnalyticLimit sphere_eigen_ratio_limit(const SphereLegendreParams& p1, const SphereSpdeParams& p2);

/// Smallest truncation degree whose tail bound is below rel_tol times the diagonal value.
template <class SphereParams>
int lmax_for_tolerance(const SphereParams& p, double rel_tol) {
    double diag = 0.0;
    int ell = 0;
    for (;; ++ell) {
        diag += p.legendre_coefficient(ell);
        if (p.tail_bound(ell) < rel_tol * diag) {
            return ell;
        }
    }
}

// ---------------------------------------------------------------------------
// Eigenvalue sequences

struct EigenSequence {
    std::vector<double> values;
    std::string label;
};

/// Periodic eigenvalues f(k) in the canonical mode order; each k != 0 appears twice (cos, sin).
EigenSequence eigen_sequence_of(const PeriodicSpectrum& s);
/// Per-degree eigenvalues for l = 0..l_max, each repeated 2l+1 times (m = -l..l).
EigenSequence eigen_sequence_of(const SphereLegendreParams& p);
EigenSequence eigen_sequence_of(const SphereSpdeParams& p);

// ---------------------------------------------------------------------------
// Kernel and spectral density abstractions

class CovarianceKernel {
public:
    virtual ~CovarianceKernel() = default;

    [[nodiscard]] virtual double operator()(const Point& x, const Point& x_prime) const = 0;
    [[nodiscard]] virtual Domain domain() const = 0;
    [[nodiscard]] virtual std::string describe() const = 0;

    /// Gram matrix [rho(x_i, x_j)], filled symmetrically.
    [[nodiscard]] Eigen::MatrixXd gram(std::span<const Point> sites) const;
    /// Cross-covariance vector [rho(x, x_i)].
    [[nodiscard]] Eigen::VectorXd cross(const Point& x, std::span<const Point> sites) const;
};

using KernelPtr = std::shared_ptr<const CovarianceKernel>;

class MaternKernel final : public CovarianceKernel {
public:
    explicit MaternKernel(MaternParams p, Domain domain);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return domain_; }
    [[nodiscard]] std::string describe() const override;
    [[nodiscard]] const MaternParams& params() const { return p_; }

private:
    MaternParams p_;
    Domain domain_;
};

class PeriodicKernel final : public CovarianceKernel {
public:
    explicit PeriodicKernel(PeriodicSpectrum s);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return Domain::torus(s_.dim()); }
    [[nodiscard]] std::string describe() const override;
    [[nodiscard]] const PeriodicSpectrum& spectrum() const { return s_; }

private:
    PeriodicSpectrum s_;
};

class SphereLegendreMaternKernel final : public CovarianceKernel {
public:
    explicit SphereLegendreMaternKernel(SphereLegendreParams p);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return Domain::sphere(); }
    [[nodiscard]] std::string describe() const override;

private:
    SphereLegendreParams p_;
    std::vector<double> coefs_;
};

class SphereSpdeKernel final : public CovarianceKernel {
public:
    explicit SphereSpdeKernel(SphereSpdeParams p);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return Domain::sphere(); }
    [[nodiscard]] std::string describe() const override;

private:
    SphereSpdeParams p_;
    std::vector<double> coefs_;
};

/// Matérn of the great-circle distance; only valid for nu <= 1/2.
class GreatCircleMaternKernel final : public CovarianceKernel {
public:
    explicit GreatCircleMaternKernel(MaternParams p);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return Domain::sphere(); }
    [[nodiscard]] std::string describe() const override;

private:
    MaternParams p_;
};

/// Matérn of the chordal (R^3) distance between points of S^2.
class ChordalMaternKernel final : public CovarianceKernel {
public:
    explicit ChordalMaternKernel(MaternParams p);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return Domain::sphere(); }
    [[nodiscard]] std::string describe() const override;

private:
    MaternParams p_;
};

/// rho(x, x') = c. Rank one; for quadrature tests only.
class ConstantKernel final : public CovarianceKernel {
public:
    ConstantKernel(double c, Domain domain);
    [[nodiscard]] double operator()(const Point&, const Point&) const override { return c_; }
    [[nodiscard]] Domain domain() const override { return domain_; }
    [[nodiscard]] std::string describe() const override;

private:
    double c_;
    Domain domain_;
};

/// c * rho for c > 0.
class ScaledKernel final : public CovarianceKernel {
public:
    ScaledKernel(double c, KernelPtr inner);
    [[nodiscard]] double operator()(const Point& x, const Point& x_prime) const override;
    [[nodiscard]] Domain domain() const override { return inner_->domain(); }
    [[nodiscard]] std::string describe() const override;

private:
    double c_;
    KernelPtr inner_;
};

class SpectralDensity {
public:
    virtual ~SpectralDensity() = default;
    [[nodiscard]] virtual double operator()(const Eigen::VectorXd& omega) const = 0;
    [[nodiscard]] virtual int dim() const = 0;
};

using SpectralDensityPtr = std::shared_ptr<const SpectralDensity>;

class MaternSpectralDensity final : public SpectralDensity {
public:
    explicit MaternSpectralDensity(MaternParams p, double scale = 1.0);
    [[nodiscard]] double operator()(const Eigen::VectorXd& omega) const override;
    [[nodiscard]] int dim() const override { return p_.dim; }

private:
    MaternParams p_;
    double scale_;
};

/// Wraps an arbitrary callable; used for hand-built densities in tests and configs.
class FunctionSpectralDensity final : public SpectralDensity {
public:
    FunctionSpectralDensity(int dim, std::function<double(const Eigen::VectorXd&)> f)
        : dim_(dim), f_(std::move(f)) {}
    [[nodiscard]] double operator()(const Eigen::VectorXd& omega) const override { return f_(omega); }
    [[nodiscard]] int dim() const override { return dim_; }

private:
    int dim_;
    std::function<double(const Eigen::VectorXd&)> f_;
};

}  // namespace misspec
