#include <fstream>
#include <set>

#include "misspec/cli.hpp"

namespace misspec::cli {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void expect_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        fail(where, "expected an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.contains(key)) {
            fail(where, "unknown key '" + key + "'");
        }
    }
}

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        fail(where, std::string("missing required key '") + key + "'");
    }
    return j.at(key);
}

double number(const json& j, const char* key, const std::string& where, std::optional<double> fallback = {}) {
    if (!j.contains(key)) {
        if (!fallback) {
            fail(where, std::string("missing required key '") + key + "'");
        }
        return *fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number()) {
        fail(where + "." + key, "expected a number");
    }
    return v.get<double>();
}

int integer(const json& j, const char* key, const std::string& where, std::optional<int> fallback = {}) {
    if (!j.contains(key)) {
        if (!fallback) {
            fail(where, std::string("missing required key '") + key + "'");
        }
        return *fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number_integer()) {
        fail(where + "." + key, "expected an integer");
    }
    return v.get<int>();
}

std::string text(const json& j, const char* key, const std::string& where, std::optional<std::string> fallback = {}) {
    if (!j.contains(key)) {
        if (!fallback) {
            fail(where, std::string("missing required key '") + key + "'");
        }
        return *fallback;
    }
    const json& v = j.at(key);
    if (!v.is_string()) {
        fail(where + "." + key, "expected a string");
    }
    return v.get<std::string>();
}

bool boolean(const json& j, const char* key, const std::string& where, bool fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    if (!j.at(key).is_boolean()) {
        fail(where + "." + key, "expected true or false");
    }
    return j.at(key).get<bool>();
}

Point point(const json& v, const std::string& where, int dim) {
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
        fail(where, "expected an array of " + std::to_string(dim) + " numbers");
    }
    Point x(dim);
    for (int i = 0; i < dim; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number()) {
            fail(where, "expected numbers");
        }
        x[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return x;
}

void check_schema(const json& j) {
    if (!j.is_object()) {
        fail("config", "expected a JSON object");
    }
    if (!j.contains("schema")) {
        fail("config", "missing 'schema' (expected 1)");
    }
    if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kSchemaVersion) {
        fail("config.schema", "unsupported schema version (expected 1)");
    }
}

// Rewraps library validation errors raised while resolving a config.
template <class Fn>
auto resolving(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    } catch (const std::domain_error& e) {
        fail(where, e.what());
    }
}

MaternParams matern_params(const json& j, const std::string& where, int dim) {
    MaternParams p{number(j, "sigma", where, 1.0), number(j, "nu", where), number(j, "kappa", where, 1.0), dim};
    return p;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

Domain parse_domain(const json& j) {
    const std::string where = "domain";
    expect_object(j, where, {"kind", "dim", "lo", "hi"});
    const std::string kind = text(j, "kind", where);
    if (kind == "box") {
        const Domain d = Domain::box(integer(j, "dim", where, 1), number(j, "lo", where, 0.0), number(j, "hi", where, 1.0));
        if (d.dim < 1 || !(d.hi > d.lo)) {
            fail(where, "box needs dim >= 1 and hi > lo");
        }
        return d;
    }
    if (j.contains("lo") || j.contains("hi")) {
        fail(where, "lo and hi apply to boxes only");
    }
    if (kind == "torus") {
        const Domain d = Domain::torus(integer(j, "dim", where, 1));
        if (d.dim < 1) {
            fail(where, "torus needs dim >= 1");
        }
        return d;
    }
    if (kind == "sphere") {
        if (j.contains("dim") && integer(j, "dim", where) != 2) {
            fail(where, "the sphere is two-dimensional");
        }
        return Domain::sphere();
    }
    fail(where + ".kind", "expected box, torus or sphere, got '" + kind + "'");
}

MeanSpec parse_mean(const json& j, const Domain& domain) {
    const std::string where = "mean";
    expect_object(j, where, {"kind", "value", "offset", "slope", "center", "exponent", "scale"});
    const std::string kind = text(j, "kind", where);
    if (kind == "zero") {
        expect_object(j, where, {"kind"});
        return MeanSpec::zero();
    }
    if (kind == "constant") {
        expect_object(j, where, {"kind", "value"});
        return MeanSpec::constant(number(j, "value", where));
    }
    if (kind == "linear") {
        expect_object(j, where, {"kind", "offset", "slope"});
        return MeanSpec::linear(number(j, "offset", where, 0.0), point(require(j, "slope", where), where + ".slope", domain.dim));
    }
    if (kind == "kink") {
        expect_object(j, where, {"kind", "offset", "center", "exponent", "scale"});
        MeanSpec m = MeanSpec::kink(point(require(j, "center", where), where + ".center", domain.dim),
                                    number(j, "exponent", where, 0.2), number(j, "scale", where, 1.0));
        m.value = number(j, "offset", where, 0.0);
        if (!(m.exponent > 0.0)) {
            fail(where + ".exponent", "must be positive");
        }
        return m;
    }
    fail(where + ".kind", "expected zero, constant, linear or kink, got '" + kind + "'");
}

KernelSpec parse_kernel(const json& j, const Domain& domain) {
    const std::string where = "kernel";
    if (!j.is_object()) {
        fail(where, "expected an object");
    }
    const std::string family = text(j, "family", where);
    KernelSpec spec;
    spec.scale = number(j, "scale", where, 1.0);
    if (!(spec.scale > 0.0)) {
        fail(where + ".scale", "must be positive");
    }
    const auto needs = [&](DomainKind k, const char* name) {
        if (domain.kind != k) {
            fail(where, "family '" + family + "' needs a " + name + " domain, got " + domain.name());
        }
    };
    if (family == "matern") {
        expect_object(j, where, {"family", "scale", "sigma", "nu", "kappa"});
        needs(DomainKind::Box, "box");
        spec.family = MaternSpec{matern_params(j, where, domain.dim), domain};
    } else if (family == "periodic") {
        expect_object(j, where, {"family", "scale", "truncation", "amplitude", "decay", "bump", "table"});
        needs(DomainKind::Torus, "torus");
        PeriodicSpec p;
        p.dim = domain.dim;
        p.truncation = integer(j, "truncation", where, 64);
        p.scale = number(j, "amplitude", where, 1.0);
        p.decay = number(j, "decay", where, 2.0);
        p.bump = number(j, "bump", where, 0.0);
        if (j.contains("table")) {
            const json& t = j.at("table");
            if (!t.is_array() || t.empty()) {
                fail(where + ".table", "expected a nonempty array");
            }
            for (const auto& e : t) {
                expect_object(e, where + ".table[]", {"k", "mass"});
                const Point k = point(require(e, "k", where + ".table[]"), where + ".table[].k", domain.dim);
                PeriodicSpec::Entry entry;
                for (double v : k) {
                    if (v != std::round(v)) {
                        fail(where + ".table[].k", "expected integer lattice indices");
                    }
                    entry.k.push_back(static_cast<int>(v));
                }
                entry.mass = number(e, "mass", where + ".table[]");
                p.table.push_back(std::move(entry));
            }
        }
        spec.family = p;
    } else if (family == "sphere_legendre_matern") {
        expect_object(j, where, {"family", "scale", "sigma1", "nu1", "kappa1", "l_max"});
        needs(DomainKind::Sphere, "sphere");
        spec.family = SphereLegendreSpec{SphereLegendreParams{number(j, "sigma1", where, 1.0), number(j, "nu1", where),
                                                              number(j, "kappa1", where, 1.0),
                                                              integer(j, "l_max", where, 256)}};
    } else if (family == "sphere_spde") {
        expect_object(j, where, {"family", "scale", "tau", "nu", "kappa", "l_max"});
        needs(DomainKind::Sphere, "sphere");
        spec.family = SphereSpdeSpec{SphereSpdeParams{number(j, "tau", where, 1.0), number(j, "nu", where),
                                                      number(j, "kappa", where, 1.0), integer(j, "l_max", where, 256)}};
    } else if (family == "great_circle_matern") {
        expect_object(j, where, {"family", "scale", "sigma", "nu", "kappa"});
        needs(DomainKind::Sphere, "sphere");
        spec.family = GreatCircleMaternSpec{matern_params(j, where, 2)};
    } else if (family == "chordal_matern") {
        expect_object(j, where, {"family", "scale", "sigma", "nu", "kappa"});
        needs(DomainKind::Sphere, "sphere");
        spec.family = ChordalMaternSpec{matern_params(j, where, 3)};
    } else if (family == "constant") {
        expect_object(j, where, {"family", "scale", "c"});
        spec.family = ConstantSpec{number(j, "c", where, 1.0), domain};
    } else {
        fail(where + ".family", "unknown kernel family '" + family + "'");
    }
    // Construct once so that parameter errors surface as config errors.
    resolving(where, [&] { return make_kernel(spec); });
    return spec;
}

ModelSpec parse_model(const json& j, const Domain& domain, const std::string& default_label) {
    const std::string where = default_label;
    expect_object(j, where, {"label", "mean", "kernel"});
    ModelSpec m;
    m.kernel = parse_kernel(require(j, "kernel", where), domain);
    m.mean = j.contains("mean") ? parse_mean(j.at("mean"), domain) : MeanSpec::zero();
    m.label = text(j, "label", where, m.kernel.family_name() + (m.mean == MeanSpec::zero() ? "" : " + " + m.mean.describe()));
    return m;
}

DesignGenerator parse_design(const json& j, const Domain& domain) {
    const std::string where = "design";
    expect_object(j, where, {"kind", "x_star", "q", "spread"});
    const std::string kind = text(j, "kind", where);
    DesignGenerator g;
    if (kind == "accumulating") {
        g = DesignGenerator::accumulating(domain, point(require(j, "x_star", where), where + ".x_star", domain.dim),
                                          number(j, "q", where, 0.5), number(j, "spread", where, 0.25));
    } else {
        if (j.contains("x_star") || j.contains("q") || j.contains("spread")) {
            fail(where, "x_star, q and spread apply to accumulating designs only");
        }
        if (kind == "grid") {
            g = DesignGenerator::grid(domain);
        } else if (kind == "halton") {
            g = DesignGenerator::halton(domain);
        } else if (kind == "sphere_fibonacci") {
            g = DesignGenerator::fibonacci();
            g.domain = domain;
        } else {
            fail(where + ".kind", "expected accumulating, grid, halton or sphere_fibonacci, got '" + kind + "'");
        }
    }
    resolving(where, [&] {
        g.validate();
        return 0;
    });
    return g;
}

TargetSetSpec parse_targets(const json& j, const Domain& domain) {
    const std::string where = "targets";
    expect_object(j, where, {"count", "near_accumulation", "extra"});
    TargetSetSpec t;
    t.count = integer(j, "count", where, 33);
    if (t.count < 0) {
        fail(where + ".count", "must be nonnegative");
    }
    t.near_accumulation = boolean(j, "near_accumulation", where, true);
    if (j.contains("extra")) {
        const json& e = j.at("extra");
        if (!e.is_array()) {
            fail(where + ".extra", "expected an array");
        }
        for (const auto& item : e) {
            expect_object(item, where + ".extra[]", {"id", "x"});
            Point x = point(require(item, "x", where + ".extra[]"), where + ".extra[].x", domain.dim);
            if (!domain.contains(x)) {
                fail(where + ".extra[]", "target outside the domain");
            }
            t.extra.emplace_back(text(item, "id", where + ".extra[]"), std::move(x));
        }
    }
    return t;
}

DiagnosticBudget parse_tolerances(const json& j) {
    const std::string where = "tolerances";
    expect_object(j, where, {"window", "tol", "radii", "eigen_terms", "nystrom_nodes", "sphere_level", "galerkin_basis",
                             "tail_tol"});
    DiagnosticBudget b;
    b.window = number(j, "window", where, b.window);
    b.tol = number(j, "tol", where, b.tol);
    b.eigen_terms = integer(j, "eigen_terms", where, b.eigen_terms);
    b.nystrom_nodes = integer(j, "nystrom_nodes", where, b.nystrom_nodes);
    b.sphere_level = integer(j, "sphere_level", where, b.sphere_level);
    b.galerkin_basis = integer(j, "galerkin_basis", where, static_cast<int>(b.galerkin_basis));
    b.tail_tol = number(j, "tail_tol", where, b.tail_tol);
    if (j.contains("radii")) {
        const json& r = j.at("radii");
        if (!r.is_array()) {
            fail(where + ".radii", "expected an array");
        }
        for (const auto& v : r) {
            if (!v.is_number()) {
                fail(where + ".radii", "expected numbers");
            }
            b.radii.push_back(v.get<double>());
        }
    }
    if (!(b.window > 0.0 && b.window <= 1.0) || !(b.tol > 0.0) || !(b.tail_tol > 0.0) || b.nystrom_nodes < 0 ||
        b.sphere_level < 0 || b.sphere_level > 7 || b.galerkin_basis < 1 || b.eigen_terms < 0) {
        fail(where, "value out of range");
    }
    return b;
}

Quadrature parse_grid(const json& j, const Domain& domain, std::string& label) {
    const std::string where = "grid";
    expect_object(j, where, {"kind", "nodes", "level"});
    const std::string kind = text(j, "kind", where);
    return resolving(where, [&]() -> Quadrature {
        if (kind == "trapezoid") {
            if (domain.kind != DomainKind::Box || domain.dim != 1) {
                fail(where, "trapezoid grids need a one-dimensional box");
            }
            const int n = integer(j, "nodes", where, 128);
            label = "trapezoid(" + std::to_string(n) + ")";
            return trapezoid_grid(domain.lo, domain.hi, n);
        }
        if (kind == "periodic") {
            if (domain.kind != DomainKind::Torus || domain.dim != 1) {
                fail(where, "periodic grids need a one-dimensional torus");
            }
            const int n = integer(j, "nodes", where, 128);
            label = "periodic(" + std::to_string(n) + ")";
            return periodic_grid(n);
        }
        if (kind == "icosahedral") {
            if (domain.kind != DomainKind::Sphere) {
                fail(where, "icosahedral grids need the sphere");
            }
            const int level = integer(j, "level", where, 3);
            label = "icosahedral(" + std::to_string(level) + ")";
            return icosahedral_grid(level);
        }
        fail(where + ".kind", "expected trapezoid, periodic or icosahedral, got '" + kind + "'");
    });
}

RunConfig parse_run_config(const json& j) {
    check_schema(j);
    expect_object(j, "config", {"schema", "scenario", "name", "description", "domain", "true_model", "wrong_model",
                                "design", "targets", "schedule", "expected_a", "output_dir", "tolerances"});
    RunConfig cfg;
    if (j.contains("scenario")) {
        for (const char* k : {"name", "description", "domain", "true_model", "wrong_model", "design", "targets"}) {
            if (j.contains(k)) {
                fail("config", std::string("'") + k + "' cannot be combined with a built-in 'scenario'");
            }
        }
        cfg.scenario = resolving("config.scenario", [&] { return builtin_scenario(text(j, "scenario", "config")); });
    } else {
        Scenario& s = cfg.scenario;
        const Domain domain = parse_domain(require(j, "domain", "config"));
        s.name = text(j, "name", "config", "custom");
        s.description = text(j, "description", "config", "");
        s.true_model = parse_model(require(j, "true_model", "config"), domain, "true_model");
        s.wrong_model = parse_model(require(j, "wrong_model", "config"), domain, "wrong_model");
        s.design = parse_design(require(j, "design", "config"), domain);
        if (j.contains("targets")) {
            s.targets = parse_targets(j.at("targets"), domain);
        }
    }
    if (j.contains("schedule")) {
        const json& sch = j.at("schedule");
        if (!sch.is_array() || sch.empty()) {
            fail("config.schedule", "expected a nonempty array of integers");
        }
        cfg.scenario.schedule.clear();
        for (const auto& v : sch) {
            if (!v.is_number_integer()) {
                fail("config.schedule", "expected integers");
            }
            cfg.scenario.schedule.push_back(v.get<int>());
        }
    }
    if (j.contains("expected_a")) {
        cfg.scenario.expected_a = number(j, "expected_a", "config");
    }
    cfg.output_dir = text(j, "output_dir", "config", ".");
    if (j.contains("tolerances")) {
        cfg.budget = parse_tolerances(j.at("tolerances"));
    }
    resolving("config", [&] {
        cfg.scenario.validate();
        return 0;
    });
    return cfg;
}

CheckConfig parse_check_config(const json& j) {
    check_schema(j);
    expect_object(j, "config", {"schema", "scenario", "domain", "true_model", "wrong_model", "tolerances"});
    CheckConfig cfg;
    if (j.contains("scenario")) {
        for (const char* k : {"domain", "true_model", "wrong_model"}) {
            if (j.contains(k)) {
                fail("config", std::string("'") + k + "' cannot be combined with a built-in 'scenario'");
            }
        }
        const Scenario s = resolving("config.scenario", [&] { return builtin_scenario(text(j, "scenario", "config")); });
        cfg.truth = s.true_model;
        cfg.wrong = s.wrong_model;
    } else {
        const Domain domain = parse_domain(require(j, "domain", "config"));
        cfg.truth = parse_model(require(j, "true_model", "config"), domain, "true_model");
        cfg.wrong = parse_model(require(j, "wrong_model", "config"), domain, "wrong_model");
    }
    if (j.contains("tolerances")) {
        cfg.budget = parse_tolerances(j.at("tolerances"));
    }
    return cfg;
}

EigenConfig parse_eigen_config(const json& j) {
    check_schema(j);
    expect_object(j, "config", {"schema", "domain", "kernel", "grid", "rank_cutoff", "output"});
    EigenConfig cfg;
    const Domain domain = parse_domain(require(j, "domain", "config"));
    cfg.kernel = parse_kernel(require(j, "kernel", "config"), domain);
    cfg.grid = parse_grid(require(j, "grid", "config"), domain, cfg.grid_label);
    cfg.rank_cutoff = number(j, "rank_cutoff", "config", 1e-12);
    if (!(cfg.rank_cutoff >= 0.0 && cfg.rank_cutoff < 1.0)) {
        fail("config.rank_cutoff", "must lie in [0, 1)");
    }
    cfg.output = text(j, "output", "config", "eigenvalues.csv");
    return cfg;
}

}  // namespace misspec::cli
