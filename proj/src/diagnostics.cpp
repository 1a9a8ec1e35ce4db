#include "misspec/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "misspec/errors.hpp"

namespace misspec {

namespace {

struct WindowStats {
    double mean = 0.0;
    double max_rel_dev = 0.0;
};

WindowStats window_stats(std::span<const double> values) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double dev = 0.0;
    for (double v : values) {
        dev = std::max(dev, std::abs(v - mean));
    }
    return {mean, dev / std::abs(mean)};
}

LimitKind trend(std::span<const double> checkpoints, double tol) {
    bool down = true;
    bool up = true;
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        down = down && checkpoints[i] < checkpoints[i - 1] * (1.0 - tol);
        up = up && checkpoints[i] > checkpoints[i - 1] * (1.0 + tol);
    }
    if (down) {
        return LimitKind::DivergesToZero;
    }
    if (up) {
        return LimitKind::DivergesToInfinity;
    }
    return LimitKind::Inconclusive;
}

std::vector<Eigen::VectorXd> default_directions(int dim) {
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e[i] = 1.0;
        dirs.push_back(e);
        dirs.push_back(-e);
    }
    if (dim > 1) {
        dirs.push_back(Eigen::VectorXd::Ones(dim).normalized());
    }
    return dirs;
}

std::vector<double> default_radii() {
    std::vector<double> r;
    for (int i = 0; i <= 24; ++i) {
        r.push_back(std::pow(10.0, 0.25 * i));
    }
    return r;
}

Quadrature tensor_product(const Quadrature& one_d, int dim) {
    Quadrature q;
    const auto m = one_d.nodes.size();
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) {
        total *= m;
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
        Point x(dim);
        double w = 1.0;
        std::size_t rest = idx;
        for (int i = 0; i < dim; ++i) {
            const std::size_t k = rest % m;
            rest /= m;
            x[i] = one_d.nodes[k][0];
            w *= one_d.weights[k];
        }
        q.nodes.push_back(std::move(x));
        q.weights.push_back(w);
    }
    return q;
}

Consistency from_kind(LimitKind k) {
    switch (k) {
        case LimitKind::Converges:
            return Consistency::Consistent;
        case LimitKind::DivergesToZero:
        case LimitKind::DivergesToInfinity:
            return Consistency::Inconsistent;
        case LimitKind::Inconclusive:
            break;
    }
    return Consistency::Undetermined;
}

}  // namespace

// ---------------------------------------------------------------------------

RatioVerdict eigen_ratio_limit(const EigenSequence& g, const EigenSequence& g_tilde, double window, double tol) {
    const std::size_t J = g.values.size();
    if (g_tilde.values.size() != J) {
        throw InvalidArgument("eigen_ratio_limit: sequences have different lengths");
    }
    if (J < 20) {
        throw InvalidArgument("eigen_ratio_limit: at least 20 eigenvalues are required");
    }
    if (!(window > 0.0 && window <= 1.0) || !(tol > 0.0)) {
        throw InvalidArgument("eigen_ratio_limit: window must lie in (0, 1] and tol be positive");
    }
    std::vector<double> r(J);
    for (std::size_t j = 0; j < J; ++j) {
        if (!(g.values[j] > 0.0) || !(g_tilde.values[j] > 0.0)) {
            throw InvalidArgument("eigen_ratio_limit: eigenvalues must be positive");
        }
        r[j] = g_tilde.values[j] / g.values[j];
    }
    const auto width = static_cast<std::size_t>(std::ceil(window * static_cast<double>(J)));
    const std::size_t start = J - std::min(width, J);
    const WindowStats stats = window_stats(std::span<const double>(r).subspan(start));

    RatioVerdict v;
    v.evidence.window_start = static_cast<double>(start);
    v.evidence.window_mean = stats.mean;
    v.evidence.max_rel_deviation = stats.max_rel_dev;
    v.evidence.checkpoints = {r[J / 16 - 1], r[J / 8 - 1], r[J / 4 - 1], r[J / 2 - 1], r[J - 1]};
    if (stats.max_rel_dev < tol) {
        v.kind = LimitKind::Converges;
        v.a_estimate = stats.mean;
        return v;
    }
    v.kind = trend(v.evidence.checkpoints, tol);
    return v;
}

RatioVerdict spectral_ratio_limit(const SpectralDensity& f, const SpectralDensity& f_tilde,
                                  std::span<const double> radii, std::span<const Eigen::VectorXd> directions,
                                  double tol) {
    if (radii.size() < 3 || !std::is_sorted(radii.begin(), radii.end()) || !(radii.front() > 0.0) ||
        radii.back() < 100.0 * radii.front()) {
        throw InvalidArgument("spectral_ratio_limit: need >= 3 increasing positive radii spanning two decades");
    }
    if (directions.empty()) {
        throw InvalidArgument("spectral_ratio_limit: no directions");
    }
    if (f.dim() != f_tilde.dim()) {
        throw InvalidArgument("spectral_ratio_limit: dimension mismatch");
    }
    const std::size_t nr = radii.size();
    const std::size_t nd = directions.size();
    Eigen::MatrixXd ratio(nr, nd);
    for (std::size_t d = 0; d < nd; ++d) {
        if (directions[d].size() != f.dim() || std::abs(directions[d].norm() - 1.0) > 1e-12) {
            throw InvalidArgument("spectral_ratio_limit: directions must be unit vectors of the density's dimension");
        }
        for (std::size_t i = 0; i < nr; ++i) {
            const Eigen::VectorXd omega = radii[i] * directions[d];
            const double base = f(omega);
            if (!(base > 0.0)) {
                throw DomainError("spectral_ratio_limit: f vanishes at a probe point");
            }
            ratio(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = f_tilde(omega) / base;
        }
    }
    const double r_max = radii.back();
    const auto first_last_decade = static_cast<std::size_t>(
        std::lower_bound(radii.begin(), radii.end(), r_max / 10.0 * (1.0 - 1e-12)) - radii.begin());
    std::vector<double> window;
    for (std::size_t i = first_last_decade; i < nr; ++i) {
        for (std::size_t d = 0; d < nd; ++d) {
            window.push_back(ratio(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)));
        }
    }
    const WindowStats stats = window_stats(window);

    const auto nearest = [&](double target) {
        const auto it = std::lower_bound(radii.begin(), radii.end(), target * (1.0 - 1e-12));
        return static_cast<Eigen::Index>(std::min<std::size_t>(it - radii.begin(), nr - 1));
    };
    const std::array<Eigen::Index, 3> idx{nearest(r_max / 100.0), nearest(r_max / 10.0),
                                          static_cast<Eigen::Index>(nr - 1)};

    RatioVerdict v;
    v.evidence.window_start = radii[first_last_decade];
    v.evidence.window_mean = stats.mean;
    v.evidence.max_rel_deviation = stats.max_rel_dev;
    for (Eigen::Index i : idx) {
        v.evidence.checkpoints.push_back(ratio.row(i).mean());
    }
    if (stats.max_rel_dev < tol) {
        v.kind = LimitKind::Converges;
        v.a_estimate = stats.mean;
        return v;
    }
    // Every direction must show the same monotone trend for a divergence verdict.
    std::optional<LimitKind> common;
    for (std::size_t d = 0; d < nd; ++d) {
        const auto col = static_cast<Eigen::Index>(d);
        const std::array<double, 3> c{ratio(idx[0], col), ratio(idx[1], col), ratio(idx[2], col)};
        const LimitKind k = trend(c, tol);
        if (!common) {
            common = k;
        } else if (*common != k) {
            common = LimitKind::Inconclusive;
        }
    }
    v.kind = common.value_or(LimitKind::Inconclusive);
    return v;
}

EquivalenceBounds spectral_equivalence_bounds(const SpectralDensity& f, const SpectralDensity& f_tilde,
                                              std::span<const Eigen::VectorXd> probe_grid) {
    if (probe_grid.empty()) {
        throw InvalidArgument("spectral_equivalence_bounds: empty probe grid");
    }
    EquivalenceBounds b{std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& omega : probe_grid) {
        const double base = f(omega);
        if (!(base > 0.0)) {
            throw DomainError("spectral_equivalence_bounds: f vanishes at a probe point");
        }
        const double r = f_tilde(omega) / base;
        b.k_hat = std::min(b.k_hat, r);
        b.K_hat = std::max(b.K_hat, r);
    }
    return b;
}

// ---------------------------------------------------------------------------

Quadrature trapezoid_grid(double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) {
        throw InvalidArgument("trapezoid_grid: need n >= 2 and hi > lo");
    }
    Quadrature q;
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        q.nodes.push_back(Point::Constant(1, lo + h * i));
        q.weights.push_back(i == 0 || i == n - 1 ? 0.5 * h : h);
    }
    return q;
}

Quadrature periodic_grid(int n) {
    if (n < 1) {
        throw InvalidArgument("periodic_grid: need n >= 1");
    }
    Quadrature q;
    for (int i = 0; i < n; ++i) {
        q.nodes.push_back(Point::Constant(1, static_cast<double>(i) / n));
        q.weights.push_back(1.0 / n);
    }
    return q;
}

Quadrature icosahedral_grid(int level) {
    if (level < 0 || level > 7) {
        throw InvalidArgument("icosahedral_grid: level must lie in [0, 7]");
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& p : v) {
        p.normalize();
    }
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        const auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) {
                return it->second;
            }
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    Quadrature q;
    const double w = 4.0 * std::numbers::pi / static_cast<double>(v.size());
    for (const auto& p : v) {
        q.nodes.emplace_back(p);
        q.weights.push_back(w);
    }
    return q;
}

Eigen::MatrixXd NystromEigen::mercer_reconstruction() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

NystromEigen nystrom_eigen(const CovarianceKernel& kernel, const Quadrature& quad, double rank_cutoff) {
    const auto n = static_cast<Eigen::Index>(quad.nodes.size());
    if (n == 0 || quad.weights.size() != quad.nodes.size()) {
        throw InvalidArgument("nystrom_eigen: nodes and weights must be nonempty and of equal length");
    }
    Eigen::VectorXd sqrt_w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = quad.weights[static_cast<std::size_t>(i)];
        if (!(w > 0.0)) {
            throw InvalidArgument("nystrom_eigen: quadrature weights must be positive");
        }
        sqrt_w[i] = std::sqrt(w);
    }
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            k(i, j) = kernel(quad.nodes[static_cast<std::size_t>(i)], quad.nodes[static_cast<std::size_t>(j)]);
        }
    }
    const double scale = k.cwiseAbs().maxCoeff();
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw NumericalError("nystrom_eigen: kernel matrix is not symmetric");
    }
    const Eigen::MatrixXd a = sqrt_w.asDiagonal() * (0.5 * (k + k.transpose())) * sqrt_w.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("nystrom_eigen: eigensolver failed");
    }
    NystromEigen out;
    out.nodes = quad.nodes;
    out.weights = quad.weights;
    out.all_eigenvalues = solver.eigenvalues().reverse();
    out.weighted_trace = (sqrt_w.array().square() * k.diagonal().array()).sum();
    const double top = out.all_eigenvalues[0];
    Eigen::Index rank = 0;
    while (rank < n && out.all_eigenvalues[rank] > rank_cutoff * top) {
        ++rank;
    }
    out.eigenvalues = out.all_eigenvalues.head(rank);
    out.eigenvectors.resize(n, rank);
    for (Eigen::Index j = 0; j < rank; ++j) {
        out.eigenvectors.col(j) = solver.eigenvectors().col(n - 1 - j).cwiseQuotient(sqrt_w);
    }
    return out;
}

TaTailReport t_a_tail_spectrum(const CovarianceKernel& true_kernel, const CovarianceKernel& wrong_kernel,
                               const Quadrature& quad, double a, Eigen::Index basis_size, double tail_tol,
                               double rank_cutoff) {
    if (basis_size < 1) {
        throw InvalidArgument("t_a_tail_spectrum: basis size must be positive");
    }
    const NystromEigen ny = nystrom_eigen(true_kernel, quad, rank_cutoff);
    if (ny.rank() < basis_size) {
        throw NumericalError("t_a_tail_spectrum: only " + std::to_string(ny.rank()) +
                             " eigenpairs above the cutoff; basis of " + std::to_string(basis_size) +
                             " exceeds the quadrature resolution");
    }
    const auto n = static_cast<Eigen::Index>(quad.nodes.size());
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = quad.weights[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd k_wrong = wrong_kernel.gram(quad.nodes);
    const Eigen::MatrixXd basis = w.asDiagonal() * ny.eigenvectors.leftCols(basis_size);
    const Eigen::VectorXd inv_sqrt_gamma = ny.eigenvalues.head(basis_size).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd b = inv_sqrt_gamma.asDiagonal() * (basis.transpose() * k_wrong * basis) * inv_sqrt_gamma.asDiagonal();
    b = 0.5 * (b + b.transpose());
    b.diagonal().array() -= a;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("t_a_tail_spectrum: eigensolver failed");
    }
    std::vector<double> eigs(solver.eigenvalues().data(), solver.eigenvalues().data() + basis_size);
    std::stable_sort(eigs.begin(), eigs.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });

    TaTailReport rep;
    rep.a_used = a;
    rep.basis_size = basis_size;
    rep.tail_tol = tail_tol;
    rep.galerkin_eigs = Eigen::Map<const Eigen::VectorXd>(eigs.data(), basis_size);
    rep.tail_index = basis_size;
    while (rep.tail_index > 0 && std::abs(eigs[static_cast<std::size_t>(rep.tail_index) - 1]) < tail_tol) {
        --rep.tail_index;
    }
    rep.hilbert_schmidt_sq = rep.galerkin_eigs.squaredNorm();
    return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(Consistency c) {
    switch (c) {
        case Consistency::Consistent:
            return "consistent";
        case Consistency::Inconsistent:
            return "inconsistent";
        case Consistency::Undetermined:
            return "undetermined";
    }
    return "?";
}

AssumptionReport assumption_report(const ModelSpec& truth, const ModelSpec& wrong, const DiagnosticBudget& budget) {
    AssumptionReport rep;
    rep.analytic = analytic_limit(truth.kernel, wrong.kernel);
    rep.notes.push_back("verdicts describe the probed scale only; no infinite-dimensional property is certified");

    if (truth.mean == wrong.mean) {
        rep.assumption_II = Consistency::Consistent;
        rep.notes.push_back("mean functions coincide");
    } else {
        rep.notes.push_back("mean functions differ; no finite membership test exists, see the mean_term column");
    }

    std::optional<double> a;
    if (share_eigenbasis(truth.kernel, wrong.kernel)) {
        rep.route = "eigen";
        int terms = budget.eigen_terms;
        if (terms <= 0) {
            terms = std::holds_alternative<PeriodicSpec>(truth.kernel.family) ? 5000 : 2000;
            if (const auto* p = std::get_if<PeriodicSpec>(&truth.kernel.family); p && p->dim > 1) {
                terms = 64;
            }
        }
        const auto g = eigen_sequence_of(truth.kernel, terms);
        const auto g_tilde = eigen_sequence_of(wrong.kernel, terms);
        rep.eigen_verdict = eigen_ratio_limit(*g, *g_tilde, budget.window, budget.tol);
        rep.assumption_I = from_kind(rep.eigen_verdict->kind);
        rep.assumption_III = rep.assumption_I;
        a = rep.eigen_verdict->a_estimate;
    } else if (auto f = spectral_density_of(truth.kernel), f_tilde = spectral_density_of(wrong.kernel);
               f && f_tilde && (*f)->dim() == (*f_tilde)->dim()) {
        rep.route = "spectral";
        const int dim = (*f)->dim();
        const std::vector<double> radii = budget.radii.empty() ? default_radii() : budget.radii;
        const auto dirs = default_directions(dim);
        rep.spectral_verdict = spectral_ratio_limit(**f, **f_tilde, radii, dirs, budget.tol);
        std::vector<Eigen::VectorXd> grid{Eigen::VectorXd::Zero(dim)};
        for (double r : radii) {
            for (const auto& d : dirs) {
                grid.push_back(r * d);
            }
        }
        rep.equivalence = spectral_equivalence_bounds(**f, **f_tilde, grid);
        rep.assumption_I = from_kind(rep.spectral_verdict->kind);
        rep.assumption_III = rep.assumption_I;
        if (rep.spectral_verdict->kind != LimitKind::Converges) {
            rep.notes.push_back("spectral ratio does not settle: the densities are not equivalent at high "
                                "frequencies, so the norm-equivalence condition fails");
        } else {
            rep.notes.push_back("high-frequency ratio settles; the analytic-class condition on f is assumed");
        }
        a = rep.spectral_verdict->a_estimate;
    } else {
        rep.route = "none";
        rep.notes.push_back("no common eigenbasis or spectral densities; conditions I and III undetermined");
    }
    if (rep.analytic.kind == LimitKind::Converges) {
        a = rep.analytic.a;
    }

    if (a && budget.nystrom_nodes > 0) {
        const Domain dom = truth.kernel.domain();
        Quadrature quad;
        switch (dom.kind) {
            case DomainKind::Box: {
                const int per_dim = std::max(8, static_cast<int>(std::lround(
                                                    std::pow(static_cast<double>(budget.nystrom_nodes), 1.0 / dom.dim))));
                quad = tensor_product(trapezoid_grid(dom.lo, dom.hi, per_dim), dom.dim);
                break;
            }
            case DomainKind::Torus: {
                const int per_dim = std::max(8, static_cast<int>(std::lround(
                                                    std::pow(static_cast<double>(budget.nystrom_nodes), 1.0 / dom.dim))));
                quad = tensor_product(periodic_grid(per_dim), dom.dim);
                break;
            }
            case DomainKind::Sphere:
                quad = icosahedral_grid(budget.sphere_level);
                break;
        }
        const KernelPtr k_true = make_kernel(truth.kernel);
        const KernelPtr k_wrong = make_kernel(wrong.kernel);
        const Eigen::Index basis = std::min<Eigen::Index>(budget.galerkin_basis,
                                                          static_cast<Eigen::Index>(quad.nodes.size()) / 2);
        try {
            rep.t_a = t_a_tail_spectrum(*k_true, *k_wrong, quad, *a, basis, budget.tail_tol);
        } catch (const NumericalError& e) {
            rep.notes.push_back(std::string("T_a proxy skipped: ") + e.what());
        }
    }
    return rep;
}

}  // namespace misspec
