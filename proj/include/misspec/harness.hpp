#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "misspec/diagnostics.hpp"
#include "misspec/kriging.hpp"
#include "misspec/ratios.hpp"

namespace misspec {

inline constexpr int kMaxDesignSize = 2048;

/// Deterministic observation-site sequences. Every generator except the grid and
/// the Fibonacci spiral is nested: the sites for n are a prefix of those for 2n.
struct DesignGenerator {
    enum class Kind { EquispacedGrid, AccumulatingAt, HaltonScatter, SphereFibonacci };

    Kind kind = Kind::EquispacedGrid;
    Domain domain = Domain::box(1);
    Point x_star;         // AccumulatingAt only
    double q = 0.5;       // contraction per doubling of n
    double spread = 0.25; // distance of the first accumulating site from x_star

    static DesignGenerator grid(Domain d) { return {Kind::EquispacedGrid, d, {}, 0.5, 0.25}; }
    static DesignGenerator halton(Domain d) { return {Kind::HaltonScatter, d, {}, 0.5, 0.25}; }
    static DesignGenerator fibonacci() { return {Kind::SphereFibonacci, Domain::sphere(), {}, 0.5, 0.25}; }
    static DesignGenerator accumulating(Domain d, Point x_star, double q = 0.5, double spread = 0.25) {
        return {Kind::AccumulatingAt, d, std::move(x_star), q, spread};
    }

    void validate() const;
    [[nodiscard]] std::string describe() const;
    [[nodiscard]] bool nested() const { return kind == Kind::AccumulatingAt || kind == Kind::HaltonScatter; }
    /// Distance from x_star to the closest accumulating site among the first n: spread * q^floor(log2 n).
    [[nodiscard]] double accumulation_radius(int n) const;
};

std::string to_string(DesignGenerator::Kind kind);

/// Sites for n observations.
///
/// AccumulatingAt places site j (1-based) at distance spread * q^m from x_star
/// when j = 2^m, alternating sides, and fills the other slots with the Halton
/// sequence, skipping points closer to x_star than spread * q^(floor(log2 j) + 1).
/// Thus the closest site to x_star at n = 2^m is exactly the level-m site.
Design generate_design(const DesignGenerator& g, int n);

struct TargetSetSpec {
    int count = 33;                 // held-out points spread over the domain
    bool near_accumulation = true;  // add x_star and x_star +- half the accumulation radius
    std::vector<std::pair<std::string, Point>> extra;
};

struct Scenario {
    std::string name;
    std::string description;
    ModelSpec true_model;
    ModelSpec wrong_model;
    DesignGenerator design;
    TargetSetSpec targets;
    std::vector<int> schedule{8, 16, 32, 64};
    std::optional<double> expected_a;

    [[nodiscard]] Domain domain() const { return design.domain; }
    void validate() const;
};

/// Point targets for one level: the held-out set, minus any point within 1e-9 of a site.
std::vector<NamedTarget> make_targets(const Scenario& s, const Design& design, int n);

std::vector<std::string> builtin_scenario_names();
/// Throws InvalidArgument for an unknown name.
Scenario builtin_scenario(std::string_view name);

struct LevelConditioning {
    int n = 0;
    double min_distance = 0.0;
    double cond_true = 0.0;   // 2-norm condition number of the true Gram matrix
    double cond_wrong = 0.0;
};

struct ScenarioResult {
    std::string scenario;
    RatioTable table;
    std::vector<LevelConditioning> conditioning;
    std::optional<AssumptionReport> report;
    std::optional<std::string> failure;  // first numerical failure, if any; results before it are kept
};

/// The limit a attached to r_*_3 and r_*_4: the scenario's expected value, else the analytic one.
std::optional<double> scenario_limit(const Scenario& s);

ScenarioResult run_scenario(const Scenario& s, const DiagnosticBudget& budget = {});
/// Runs scenarios concurrently; results are in input order.
std::vector<ScenarioResult> run_scenarios(const std::vector<Scenario>& scenarios,
                                          const DiagnosticBudget& budget = {});

}  // namespace misspec
