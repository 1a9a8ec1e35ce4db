#include "misspec/harness.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "misspec/errors.hpp"
#include "parallel.hpp"

namespace misspec {

namespace {

constexpr std::array<int, 8> kPrimes{2, 3, 5, 7, 11, 13, 17, 19};
constexpr double kCollisionTol = 1e-12;
constexpr double kTargetClearance = 1e-9;

double radical_inverse(long k, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (k > 0) {
        r += f * static_cast<double>(k % base);
        k /= base;
        f *= inv;
    }
    return r;
}

int floor_log2(int n) {
    int m = 0;
    while ((2L << m) <= n) {
        ++m;
    }
    return m;
}

// Map a point of the unit cube to the domain; the sphere uses the area-preserving
// (z, phi) parametrization.
Point from_unit(const Domain& d, const std::vector<double>& u) {
    switch (d.kind) {
        case DomainKind::Box: {
            Point x(d.dim);
            for (int i = 0; i < d.dim; ++i) {
                x[i] = d.lo + (d.hi - d.lo) * u[static_cast<std::size_t>(i)];
            }
            return x;
        }
        case DomainKind::Torus:
            return Eigen::Map<const Eigen::VectorXd>(u.data(), d.dim);
        case DomainKind::Sphere: {
            const double z = 1.0 - 2.0 * u[0];
            const double phi = 2.0 * std::numbers::pi * u[1];
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            return Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z);
        }
    }
    throw InvalidArgument("unknown domain kind");
}

int unit_dim(const Domain& d) { return d.kind == DomainKind::Sphere ? 2 : d.dim; }

Point halton_point(const Domain& d, long k) {
    const int m = unit_dim(d);
    if (m > static_cast<int>(kPrimes.size())) {
        throw InvalidArgument("Halton sequence supports at most 8 dimensions");
    }
    std::vector<double> u(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        u[static_cast<std::size_t>(i)] = radical_inverse(k, kPrimes[static_cast<std::size_t>(i)]);
    }
    return from_unit(d, u);
}

// Unit direction along which accumulating sites approach x_star.
Point accumulation_direction(const Domain& d, const Point& x_star) {
    if (d.kind == DomainKind::Sphere) {
        Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
        if (std::abs(x_star.dot(axis)) > 0.9) {
            axis = Eigen::Vector3d::UnitX();
        }
        return (axis - axis.dot(x_star) * x_star).normalized();
    }
    Point e = Point::Zero(d.dim);
    e[0] = 1.0;
    return e;
}

// x_star moved by signed distance `offset` along the accumulation direction.
Point offset_point(const Domain& d, const Point& x_star, double offset) {
    const Point dir = accumulation_direction(d, x_star);
    switch (d.kind) {
        case DomainKind::Box:
            return x_star + offset * dir;
        case DomainKind::Torus: {
            Point y = x_star + offset * dir;
            for (auto& v : y) {
                v -= std::floor(v);
            }
            return y;
        }
        case DomainKind::Sphere:
            return std::cos(offset) * x_star + std::sin(offset) * dir;
    }
    throw InvalidArgument("unknown domain kind");
}

bool collides(const Domain& d, const std::vector<Point>& sites, const Point& p, double tol) {
    for (const auto& s : sites) {
        if (d.distance(s, p) < tol) {
            return true;
        }
    }
    return false;
}

std::vector<Point> fibonacci_sphere(int n) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        pts.emplace_back(Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z));
    }
    return pts;
}

std::string target_id(int i, int count) {
    const int width = std::max(2, static_cast<int>(std::to_string(count - 1).size()));
    std::string s = std::to_string(i);
    return "t" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

ModelSpec model(MeanSpec mean, KernelSpec kernel, std::string label) {
    return {std::move(mean), std::move(kernel), std::move(label)};
}

KernelSpec matern(double sigma, double nu, double kappa) {
    return {MaternSpec{MaternParams{sigma, nu, kappa, 1}, Domain::box(1)}, 1.0};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(DesignGenerator::Kind kind) {
    switch (kind) {
        case DesignGenerator::Kind::EquispacedGrid:
            return "equispaced_grid";
        case DesignGenerator::Kind::AccumulatingAt:
            return "accumulating";
        case DesignGenerator::Kind::HaltonScatter:
            return "halton";
        case DesignGenerator::Kind::SphereFibonacci:
            return "sphere_fibonacci";
    }
    return "?";
}

void DesignGenerator::validate() const {
    if (domain.dim < 1) {
        throw InvalidArgument("design: domain dimension must be positive");
    }
    if (kind == Kind::SphereFibonacci && domain.kind != DomainKind::Sphere) {
        throw InvalidArgument("design: the Fibonacci spiral needs the sphere domain");
    }
    if (kind == Kind::EquispacedGrid && domain.kind == DomainKind::Sphere) {
        throw InvalidArgument("design: no equispaced grid on the sphere; use sphere_fibonacci");
    }
    if (kind != Kind::AccumulatingAt) {
        return;
    }
    if (!(q > 0.0 && q < 1.0)) {
        throw InvalidArgument("design: contraction ratio q must lie in (0, 1)");
    }
    if (!(spread > 0.0)) {
        throw InvalidArgument("design: spread must be positive");
    }
    if (x_star.size() != domain.dim || !domain.contains(x_star)) {
        throw InvalidArgument("design: x_star must be a point of the domain");
    }
    switch (domain.kind) {
        case DomainKind::Box:
            if (x_star[0] - spread < domain.lo || x_star[0] + spread > domain.hi) {
                throw InvalidArgument("design: x_star +- spread must stay inside the box");
            }
            break;
        case DomainKind::Torus:
            if (spread >= 0.5) {
                throw InvalidArgument("design: spread must be below 1/2 on the torus");
            }
            break;
        case DomainKind::Sphere:
            if (spread >= std::numbers::pi / 2) {
                throw InvalidArgument("design: spread must be below pi/2 on the sphere");
            }
            break;
    }
}

std::string DesignGenerator::describe() const {
    std::ostringstream os;
    os << to_string(kind) << " on " << domain.name();
    if (kind == Kind::AccumulatingAt) {
        os << " at (";
        for (Eigen::Index i = 0; i < x_star.size(); ++i) {
            os << (i ? ", " : "") << x_star[i];
        }
        os << "), q=" << q << ", spread=" << spread;
    }
    return os.str();
}

double DesignGenerator::accumulation_radius(int n) const {
    if (n < 1) {
        throw InvalidArgument("accumulation_radius: n must be positive");
    }
    return spread * std::pow(q, floor_log2(n));
}

Design generate_design(const DesignGenerator& g, int n) {
    if (n < 1) {
        throw InvalidArgument("generate_design: n must be at least 1");
    }
    if (n > kMaxDesignSize) {
        throw InvalidArgument("generate_design: n = " + std::to_string(n) + " exceeds the maximum design size " +
                              std::to_string(kMaxDesignSize));
    }
    g.validate();
    const Domain& d = g.domain;
    std::vector<Point> sites;
    sites.reserve(static_cast<std::size_t>(n));

    switch (g.kind) {
        case DesignGenerator::Kind::EquispacedGrid: {
            const int m = static_cast<int>(std::lround(std::pow(static_cast<double>(n), 1.0 / d.dim)));
            long total = 1;
            for (int i = 0; i < d.dim; ++i) {
                total *= m;
            }
            if (total != n) {
                throw InvalidArgument("generate_design: an equispaced grid in dimension " + std::to_string(d.dim) +
                                      " needs n to be a perfect power");
            }
            for (long idx = 0; idx < total; ++idx) {
                std::vector<double> u(static_cast<std::size_t>(d.dim));
                long rest = idx;
                for (int i = 0; i < d.dim; ++i) {
                    u[static_cast<std::size_t>(i)] = static_cast<double>(rest % m + 1) / (m + 1);
                    rest /= m;
                }
                sites.push_back(from_unit(d, u));
            }
            break;
        }
        case DesignGenerator::Kind::SphereFibonacci:
            sites = fibonacci_sphere(n);
            break;
        case DesignGenerator::Kind::HaltonScatter: {
            for (long k = 1; static_cast<int>(sites.size()) < n; ++k) {
                Point p = halton_point(d, k);
                if (!collides(d, sites, p, kCollisionTol)) {
                    sites.push_back(std::move(p));
                }
            }
            break;
        }
        case DesignGenerator::Kind::AccumulatingAt: {
            long k = 1;
            for (int j = 1; j <= n; ++j) {
                const int level = floor_log2(j);
                if ((1 << level) == j) {
                    const double sign = level % 2 == 0 ? 1.0 : -1.0;
                    sites.push_back(offset_point(d, g.x_star, sign * g.spread * std::pow(g.q, level)));
                    continue;
                }
                const double keep_out = g.spread * std::pow(g.q, level + 1);
                for (;; ++k) {
                    Point p = halton_point(d, k);
                    if (d.distance(p, g.x_star) >= keep_out && !collides(d, sites, p, kCollisionTol)) {
                        sites.push_back(std::move(p));
                        ++k;
                        break;
                    }
                }
            }
            break;
        }
    }
    return Design(std::move(sites));
}

// ---------------------------------------------------------------------------

void Scenario::validate() const {
    if (name.empty()) {
        throw InvalidArgument("scenario: name is required");
    }
    design.validate();
    if (schedule.empty()) {
        throw InvalidArgument("scenario " + name + ": empty schedule");
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i] < 1 || schedule[i] > kMaxDesignSize || (i > 0 && schedule[i] <= schedule[i - 1])) {
            throw InvalidArgument("scenario " + name + ": schedule must be strictly increasing within [1, " +
                                  std::to_string(kMaxDesignSize) + "]");
        }
    }
    for (const ModelSpec* m : {&true_model, &wrong_model}) {
        const Domain kd = m->kernel.domain();
        if (kd.kind != design.domain.kind || kd.dim != design.domain.dim) {
            throw InvalidArgument("scenario " + name + ": kernel domain " + kd.name() +
                                  " does not match the design domain " + design.domain.name());
        }
    }
    if (targets.count < 0) {
        throw InvalidArgument("scenario " + name + ": negative target count");
    }
    if (expected_a && !(*expected_a > 0.0)) {
        throw InvalidArgument("scenario " + name + ": expected a must be positive");
    }
}

std::vector<NamedTarget> make_targets(const Scenario& s, const Design& design, int n) {
    const Domain& d = s.design.domain;
    std::vector<std::pair<std::string, Point>> pts;
    const int count = s.targets.count;
    if (d.kind == DomainKind::Sphere) {
        const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.5, Eigen::Vector3d::Ones().normalized()).toRotationMatrix();
        const auto base = fibonacci_sphere(count);
        for (int i = 0; i < count; ++i) {
            pts.emplace_back(target_id(i, count), Point(rot * base[static_cast<std::size_t>(i)]));
        }
    } else if (d.dim == 1) {
        for (int i = 0; i < count; ++i) {
            pts.emplace_back(target_id(i, count), from_unit(d, {(i + 0.5) / count}));
        }
    } else {
        // Far beyond any index a design can reach, so the two sets stay apart.
        for (int i = 0; i < count; ++i) {
            pts.emplace_back(target_id(i, count), halton_point(d, 100003L + i));
        }
    }
    if (s.targets.near_accumulation && s.design.kind == DesignGenerator::Kind::AccumulatingAt) {
        const double half = 0.5 * s.design.accumulation_radius(n);
        pts.emplace_back("xstar", s.design.x_star);
        pts.emplace_back("xstar+", offset_point(d, s.design.x_star, half));
        pts.emplace_back("xstar-", offset_point(d, s.design.x_star, -half));
    }
    for (const auto& e : s.targets.extra) {
        pts.push_back(e);
    }

    std::vector<Point> sites(design.sites().begin(), design.sites().end());
    std::vector<NamedTarget> out;
    for (auto& [id, x] : pts) {
        if (!d.contains(x) || collides(d, sites, x, kTargetClearance)) {
            continue;
        }
        out.push_back({id, TargetFunctional::point(std::move(x))});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> builtin_scenario_names() {
    return {"identical",       "scaled_kernel",           "matern_same_nu",      "matern_diff_nu",
            "periodic_ratio3", "sphere_legendre_vs_spde", "mean_shift_constant", "mean_shift_kink"};
}

Scenario builtin_scenario(std::string_view name) {
    const Point x_star = Point::Constant(1, 0.37);
    Scenario s;
    s.name = std::string(name);
    s.design = DesignGenerator::accumulating(Domain::box(1), x_star);

    if (name == "identical") {
        s.description = "Matérn nu=0.5 against itself";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "matern(1,0.5,1)");
        s.wrong_model = s.true_model;
        s.expected_a = 1.0;
    } else if (name == "scaled_kernel") {
        s.description = "Matérn nu=0.5 against four times the same kernel";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "matern(1,0.5,1)");
        s.wrong_model = model(MeanSpec::zero(), matern(2, 0.5, 1), "matern(2,0.5,1)");
        s.expected_a = 4.0;
    } else if (name == "matern_same_nu") {
        s.description = "same smoothness, different sigma and kappa; microergodic ratio 2";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "matern(1,0.5,1)");
        s.wrong_model = model(MeanSpec::zero(), matern(2, 0.5, 0.5), "matern(2,0.5,0.5)");
        s.expected_a = 2.0;
    } else if (name == "matern_diff_nu") {
        s.description = "smoothness mismatch nu=0.5 against nu=1.5";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "matern(1,0.5,1)");
        s.wrong_model = model(MeanSpec::zero(), matern(1, 1.5, 1), "matern(1,1.5,1)");
    } else if (name == "periodic_ratio3") {
        s.description = "periodic field on the circle; eigenvalue ratio tends to 3";
        PeriodicSpec truth;
        PeriodicSpec wrong;
        wrong.scale = 3.0;
        wrong.bump = 1.0;
        s.true_model = model(MeanSpec::zero(), {truth, 1.0}, "periodic(1+k^2)^-2");
        s.wrong_model = model(MeanSpec::zero(), {wrong, 1.0}, "periodic 3(1+k^2)^-2(1+1/(1+|k|))");
        s.design = DesignGenerator::accumulating(Domain::torus(1), x_star);
        s.expected_a = 3.0;
    } else if (name == "sphere_legendre_vs_spde") {
        s.description = "Legendre-Matérn against SPDE on the sphere, nu1 = nu = 1";
        s.true_model = model(MeanSpec::zero(), {SphereLegendreSpec{SphereLegendreParams{1.0, 1.0, 1.0}}, 1.0},
                             "legendre_matern(1,1,1)");
        s.wrong_model =
            model(MeanSpec::zero(), {SphereSpdeSpec{SphereSpdeParams{1.0, 1.0, 1.0}}, 1.0}, "spde(1,1,1)");
        s.design = DesignGenerator::fibonacci();
        s.targets.near_accumulation = false;
        s.expected_a = 1.0 / (2.0 * std::numbers::pi);
    } else if (name == "mean_shift_constant") {
        s.description = "constant mean shift of 1 under Matérn nu=0.5";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "zero mean");
        s.wrong_model = model(MeanSpec::constant(1.0), matern(1, 0.5, 1), "constant mean 1");
        s.expected_a = 1.0;
    } else if (name == "mean_shift_kink") {
        s.description = "mean shift |x - 0.37|^0.2 under Matérn nu=0.5; reported only";
        s.true_model = model(MeanSpec::zero(), matern(1, 0.5, 1), "zero mean");
        s.wrong_model = model(MeanSpec::kink(x_star, 0.2), matern(1, 0.5, 1), "kink mean |x-0.37|^0.2");
        s.expected_a = 1.0;
    } else {
        throw InvalidArgument("unknown scenario '" + std::string(name) + "'");
    }
    return s;
}

// ---------------------------------------------------------------------------

std::optional<double> scenario_limit(const Scenario& s) {
    if (s.expected_a) {
        return s.expected_a;
    }
    const AnalyticLimit lim = analytic_limit(s.true_model.kernel, s.wrong_model.kernel);
    return lim.kind == LimitKind::Converges ? lim.a : std::nullopt;
}

namespace {

double condition_number(const Eigen::MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s, const DiagnosticBudget& budget) {
    s.validate();
    const GaussianModel truth = GaussianModel::from_spec(s.true_model);
    const GaussianModel wrong = GaussianModel::from_spec(s.wrong_model);
    const DesignSource designs = [&s](int n) { return generate_design(s.design, n); };
    const TargetSource targets = [&s](const Design& d, int n) { return make_targets(s, d, n); };

    ScenarioResult res;
    res.scenario = s.name;
    res.table = ratio_convergence_partial(truth, wrong, designs, targets, s.schedule, RatioLimits{scenario_limit(s)});
    res.table.design_label = s.design.describe();
    res.table.target_label = std::to_string(s.targets.count) + " held-out points" +
                             (s.targets.near_accumulation && s.design.kind == DesignGenerator::Kind::AccumulatingAt
                                  ? " plus 3 near x_star"
                                  : "");
    res.failure = res.table.failure;

    res.conditioning.resize(res.table.levels.size());
    detail::parallel_for(res.table.levels.size(), [&](std::size_t i) {
        const int n = res.table.levels[i].n;
        const Design d = designs(n);
        res.conditioning[i] = {n, d.size() > 1 ? d.min_pairwise_distance() : 0.0,
                               condition_number(truth.kernel->gram(d.sites())),
                               condition_number(wrong.kernel->gram(d.sites()))};
    });

    try {
        res.report = assumption_report(s.true_model, s.wrong_model, budget);
    } catch (const NumericalError& e) {
        if (!res.failure) {
            res.failure = std::string("diagnostics: ") + e.what();
        }
    }
    return res;
}

std::vector<ScenarioResult> run_scenarios(const std::vector<Scenario>& scenarios, const DiagnosticBudget& budget) {
    for (const auto& s : scenarios) {
        s.validate();
    }
    std::vector<ScenarioResult> out(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    detail::parallel_for(scenarios.size(), [&](std::size_t i) {
        try {
            out[i] = run_scenario(scenarios[i], budget);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

}  // namespace misspec
