#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "misspec/kriging.hpp"

namespace misspec {

// The eight efficiency ratios plus the mean-misspecification term, in output order.
enum class RatioName { RVar1, RVar2, RVar3, RVar4, RMom1, RMom2, RMom3, RMom4, MeanTerm };

inline constexpr std::size_t kRatioCount = 9;
inline constexpr std::array<RatioName, kRatioCount> kAllRatios = {
    RatioName::RVar1, RatioName::RVar2, RatioName::RVar3, RatioName::RVar4, RatioName::RMom1,
    RatioName::RMom2, RatioName::RMom3, RatioName::RMom4, RatioName::MeanTerm,
};

std::string_view ratio_name(RatioName r);

struct RatioValue {
    double value = 0.0;
    std::optional<double> limit;

    /// |value - limit|, or NaN when no limit is attached.
    [[nodiscard]] double abs_dev() const;
};

inline constexpr std::string_view kSupTargetId = "SUP";

/// Error moments of the two predictors under the two measures, for one target.
/// `true_of_wrong` is the wrong-model predictor evaluated under the true measure, etc.
struct MomentQuad {
    ErrorMoments true_of_true;
    ErrorMoments true_of_wrong;
    ErrorMoments wrong_of_true;
    ErrorMoments wrong_of_wrong;
};

struct RatioRecord {
    int n = 0;
    std::string target_id;
    std::array<RatioValue, kRatioCount> ratios;
    std::optional<MomentQuad> moments;  // absent on the SUP record

    [[nodiscard]] const RatioValue& operator[](RatioName r) const { return ratios[static_cast<std::size_t>(r)]; }
    [[nodiscard]] RatioValue& operator[](RatioName r) { return ratios[static_cast<std::size_t>(r)]; }
    [[nodiscard]] bool is_sup() const { return target_id == kSupTargetId; }
};

struct NamedTarget {
    std::string id;
    TargetFunctional target;
};

/// Limits attached to the records. r_*_1, r_*_2 tend to 1 and the mean term to 0;
/// r_*_3 -> a and r_*_4 -> 1/a are attached only when a is known.
struct RatioLimits {
    std::optional<double> a;
};

struct RatioSet {
    std::vector<RatioRecord> records;  // one per usable target, then the SUP record
    std::vector<std::string> warnings; // excluded targets
};

/// Kriging variance under the true model below which a target is excluded.
inline constexpr double kMinTargetVariance = 1e-12;

RatioSet efficiency_ratios(const Design& design, const std::vector<NamedTarget>& targets,
                           const GaussianModel& true_model, const GaussianModel& wrong_model,
                           const RatioLimits& limits = {});

/// ((m - m~)(h) - w'(m - m~)_n)^2 / Var[h_n - h] for the true-model predictor w;
/// the two models must share the covariance kernel.
double mean_term(const Design& design, const TargetFunctional& target, const GaussianModel& true_model,
                 const GaussianModel& wrong_mean_model);

struct RatioTable {
    struct Level {
        int n = 0;
        std::vector<RatioRecord> records;  // SUP last
        std::vector<std::string> warnings;

        [[nodiscard]] const RatioRecord& sup() const { return records.back(); }
        [[nodiscard]] const RatioRecord* find(std::string_view target_id) const;
    };

    std::string true_label;
    std::string wrong_label;
    std::string design_label;
    std::string target_label;
    std::vector<Level> levels;  // strictly increasing n
    // Set by ratio_convergence_partial when a level failed; `levels` then holds
    // the levels preceding the first failure.
    std::optional<std::string> failure;
};

using DesignSource = std::function<Design(int n)>;
using TargetSource = std::function<std::vector<NamedTarget>(const Design& design, int n)>;

/// Evaluates efficiency_ratios at each n of the schedule. Levels run concurrently
/// (see worker_count()); the table does not depend on completion order.
RatioTable ratio_convergence(const GaussianModel& true_model, const GaussianModel& wrong_model,
                             const DesignSource& designs, const TargetSource& targets,
                             const std::vector<int>& n_schedule, const RatioLimits& limits = {});

/// As ratio_convergence, but a NumericalError at some level truncates the table
/// there and is reported in RatioTable::failure instead of being thrown.
RatioTable ratio_convergence_partial(const GaussianModel& true_model, const GaussianModel& wrong_model,
                                     const DesignSource& designs, const TargetSource& targets,
                                     const std::vector<int>& n_schedule, const RatioLimits& limits = {});

/// Violations of the record invariants: r_var_1, r_var_2, r_mom_1, r_mom_2 >= 1 - tol;
/// the chain identity for r_var_1; the mean-variance split of r_mom_3; finiteness.
std::vector<std::string> check_record_invariants(const RatioRecord& record, double tol = 1e-10);

/// Worker threads for concurrent evaluation: hardware concurrency capped by
/// MISSPEC_KRIGE_THREADS when set.
unsigned worker_count();

}  // namespace misspec
