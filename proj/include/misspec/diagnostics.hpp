#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "misspec/kernel_spec.hpp"
#include "misspec/kernels.hpp"
#include "misspec/kriging.hpp"

namespace misspec {

// Finite-scale probes of the conditions for asymptotically optimal prediction.
// None of these can decide an infinite-dimensional property; verdicts read
// "consistent with" the asymptotic statement at the probed scale.

struct VerdictEvidence {
    double window_start = 0.0;       // first index (eigen route) or radius (spectral route) of the window
    double window_mean = 0.0;
    double max_rel_deviation = 0.0;  // max |r - mean| / mean over the window
    std::vector<double> checkpoints; // ratio values at the divergence checkpoints
};

struct RatioVerdict {
    LimitKind kind = LimitKind::Inconclusive;
    std::optional<double> a_estimate;  // present iff kind == Converges
    VerdictEvidence evidence;
};

inline constexpr double kDefaultWindow = 0.2;
inline constexpr double kDefaultTol = 1e-2;

/// Verdict on lim g~_j / g_j for two eigenvalue sequences in a common basis ordering.
///
/// Converges(mean) when the trailing window (last ceil(window J) entries) stays within
/// tol * mean of its mean. Otherwise a divergence verdict when the ratio at the
/// checkpoints J/16, J/8, J/4, J/2, J moves monotonically by more than a factor
/// (1 - tol) per doubling; Inconclusive otherwise. Five doublings keep a ratio that
/// oscillates in log j from passing as a trend.
RatioVerdict eigen_ratio_limit(const EigenSequence& g, const EigenSequence& g_tilde, double window = kDefaultWindow,
                               double tol = kDefaultTol);

/// Verdict on lim f~(omega) / f(omega) as |omega| -> infinity, probed on radii x directions.
RatioVerdict spectral_ratio_limit(const SpectralDensity& f, const SpectralDensity& f_tilde,
                                  std::span<const double> radii, std::span<const Eigen::VectorXd> directions,
                                  double tol = kDefaultTol);

struct EquivalenceBounds {
    double k_hat = 0.0;  // min f~/f on the probe set
    double K_hat = 0.0;  // max f~/f on the probe set
};

/// Empirical bounds on f~/f over a probe grid; a necessary-condition probe for f ~ f~.
EquivalenceBounds spectral_equivalence_bounds(const SpectralDensity& f, const SpectralDensity& f_tilde,
                                              std::span<const Eigen::VectorXd> probe_grid);

// ---------------------------------------------------------------------------
// Quadrature and Nyström

struct Quadrature {
    std::vector<Point> nodes;
    std::vector<double> weights;
};

/// Trapezoid rule on n uniform nodes of [lo, hi] (endpoints included).
Quadrature trapezoid_grid(double lo, double hi, int n);
/// n uniform nodes i/n of the circle [0, 1) with equal weights 1/n.
Quadrature periodic_grid(int n);
/// Vertices of the icosahedron refined `level` times and projected to S^2,
/// equal weights 4 pi / N with N = 10 * 4^level + 2.
Quadrature icosahedral_grid(int level);

struct NystromEigen {
    std::vector<Point> nodes;
    std::vector<double> weights;
    Eigen::VectorXd eigenvalues;   // descending, all > rank_cutoff * largest
    Eigen::MatrixXd eigenvectors;  // column j holds e_j at the nodes; sum_i w_i e_j e_k = delta_jk
    Eigen::VectorXd all_eigenvalues;  // full discrete spectrum, descending
    double weighted_trace = 0.0;      // sum_i w_i rho(x_i, x_i)

    [[nodiscard]] Eigen::Index rank() const { return eigenvalues.size(); }
    /// sum_j gamma_j e_j(x_a) e_j(x_b) on the nodes.
    [[nodiscard]] Eigen::MatrixXd mercer_reconstruction() const;
};

NystromEigen nystrom_eigen(const CovarianceKernel& kernel, const Quadrature& quad, double rank_cutoff = 1e-12);

struct TaTailReport {
    double a_used = 0.0;
    Eigen::VectorXd galerkin_eigs;  // sorted by decreasing magnitude
    Eigen::Index tail_index = 0;    // first index past which every |eig| < tol
    Eigen::Index basis_size = 0;
    double tail_tol = 0.0;
    double hilbert_schmidt_sq = 0.0;  // sum of squared Galerkin eigenvalues
};

/// Finite-rank Galerkin proxy for C^-1/2 C~ C^-1/2 - a I on the leading Nyström
/// eigenfunctions of the true covariance.
TaTailReport t_a_tail_spectrum(const CovarianceKernel& true_kernel, const CovarianceKernel& wrong_kernel,
                               const Quadrature& quad, double a, Eigen::Index basis_size, double tail_tol = 1e-3,
                               double rank_cutoff = 1e-13);

// ---------------------------------------------------------------------------
// Composite report

struct DiagnosticBudget {
    double window = kDefaultWindow;
    double tol = kDefaultTol;
    std::vector<double> radii;                // empty: 10^0 .. 10^6 in quarter decades
    int eigen_terms = 0;                      // 0: 5000 lattice shells / degree 2000
    int nystrom_nodes = 128;                  // per dimension on boxes and tori; 0 disables T_a
    int sphere_level = 3;                     // icosahedral refinement for Nyström on S^2
    Eigen::Index galerkin_basis = 24;
    double tail_tol = 1e-3;
};

enum class Consistency { Consistent, Inconsistent, Undetermined };

std::string to_string(Consistency c);

struct AssumptionReport {
    std::string route;  // "eigen", "spectral" or "none"
    AnalyticLimit analytic;
    std::optional<RatioVerdict> eigen_verdict;
    std::optional<RatioVerdict> spectral_verdict;
    std::optional<EquivalenceBounds> equivalence;
    std::optional<TaTailReport> t_a;
    Consistency assumption_I = Consistency::Undetermined;
    Consistency assumption_II = Consistency::Undetermined;
    Consistency assumption_III = Consistency::Undetermined;
    std::vector<std::string> notes;
};

AssumptionReport assumption_report(const ModelSpec& truth, const ModelSpec& wrong,
                                   const DiagnosticBudget& budget = {});

}  // namespace misspec
