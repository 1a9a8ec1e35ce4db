#include "misspec/ratios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>

#include "misspec/errors.hpp"
#include "parallel.hpp"

namespace misspec {

namespace {

double safe_ratio(double num, double den) { return num / den; }

RatioRecord make_record(int n, const std::string& id, const MomentQuad& q, const RatioLimits& limits) {
    const auto& tt = q.true_of_true;
    const auto& tw = q.true_of_wrong;
    const auto& wt = q.wrong_of_true;
    const auto& ww = q.wrong_of_wrong;

    RatioRecord rec;
    rec.n = n;
    rec.target_id = id;
    rec.moments = q;
    const std::optional<double> a = limits.a;
    const std::optional<double> inv_a = a ? std::optional<double>(1.0 / *a) : std::nullopt;

    rec[RatioName::RVar1] = {safe_ratio(tw.variance, tt.variance), 1.0};
    rec[RatioName::RVar2] = {safe_ratio(wt.variance, ww.variance), 1.0};
    rec[RatioName::RVar3] = {safe_ratio(wt.variance, tt.variance), a};
    rec[RatioName::RVar4] = {safe_ratio(tw.variance, ww.variance), inv_a};
    rec[RatioName::RMom1] = {safe_ratio(tw.second_moment, tt.second_moment), 1.0};
    rec[RatioName::RMom2] = {safe_ratio(wt.second_moment, ww.second_moment), 1.0};
    rec[RatioName::RMom3] = {safe_ratio(wt.second_moment, tt.second_moment), a};
    rec[RatioName::RMom4] = {safe_ratio(tw.second_moment, ww.second_moment), inv_a};
    rec[RatioName::MeanTerm] = {safe_ratio(wt.mean * wt.mean, tt.second_moment), 0.0};
    return rec;
}

RatioRecord sup_record(int n, const std::vector<RatioRecord>& records) {
    RatioRecord sup;
    sup.n = n;
    sup.target_id = std::string(kSupTargetId);
    for (const RatioName r : kAllRatios) {
        const RatioValue* best = nullptr;
        for (const auto& rec : records) {
            const RatioValue& v = rec[r];
            if (best == nullptr) {
                best = &v;
                continue;
            }
            const bool better = v.limit ? v.abs_dev() > best->abs_dev() : v.value > best->value;
            if (better) {
                best = &v;
            }
        }
        sup[r] = *best;
    }
    return sup;
}

}  // namespace

std::string_view ratio_name(RatioName r) {
    switch (r) {
        case RatioName::RVar1:
            return "r_var_1";
        case RatioName::RVar2:
            return "r_var_2";
        case RatioName::RVar3:
            return "r_var_3";
        case RatioName::RVar4:
            return "r_var_4";
        case RatioName::RMom1:
            return "r_mom_1";
        case RatioName::RMom2:
            return "r_mom_2";
        case RatioName::RMom3:
            return "r_mom_3";
        case RatioName::RMom4:
            return "r_mom_4";
        case RatioName::MeanTerm:
            return "mean_term";
    }
    return "?";
}

double RatioValue::abs_dev() const {
    return limit ? std::abs(value - *limit) : std::numeric_limits<double>::quiet_NaN();
}

RatioSet efficiency_ratios(const Design& design, const std::vector<NamedTarget>& targets,
                           const GaussianModel& true_model, const GaussianModel& wrong_model,
                           const RatioLimits& limits) {
    const Eigen::MatrixXd gram_true = true_model.kernel->gram(design.sites());
    const Eigen::MatrixXd gram_wrong = wrong_model.kernel->gram(design.sites());
    const GramFactor f_true = factorize_gram(gram_true);
    const GramFactor f_wrong = factorize_gram(gram_wrong);
    const int n = static_cast<int>(design.size());

    RatioSet out;
    for (const auto& [id, target] : targets) {
        const LinearPredictor h = kriging_predictor(target, design, true_model, f_true);
        const LinearPredictor h_tilde = kriging_predictor(target, design, wrong_model, f_wrong);
        MomentQuad q;
        q.true_of_true = error_moments(h, target, true_model, gram_true);
        q.wrong_of_wrong = error_moments(h_tilde, target, wrong_model, gram_wrong);
        if (q.true_of_true.variance <= kMinTargetVariance || q.wrong_of_wrong.variance <= kMinTargetVariance) {
            out.warnings.push_back("n=" + std::to_string(n) + ": target " + id +
                                   " excluded, kriging variance below " + std::to_string(kMinTargetVariance));
            continue;
        }
        q.true_of_wrong = error_moments(h_tilde, target, true_model, gram_true);
        q.wrong_of_true = error_moments(h, target, wrong_model, gram_wrong);
        out.records.push_back(make_record(n, id, q, limits));
    }
    if (out.records.empty()) {
        throw NumericalError("efficiency_ratios: every target was excluded at n=" + std::to_string(n));
    }
    out.records.push_back(sup_record(n, out.records));
    return out;
}

double mean_term(const Design& design, const TargetFunctional& target, const GaussianModel& true_model,
                 const GaussianModel& wrong_mean_model) {
    const Eigen::MatrixXd gram = true_model.kernel->gram(design.sites());
    const LinearPredictor h = kriging_predictor(target, design, true_model, factorize_gram(gram));
    const ErrorMoments own = error_moments(h, target, true_model, gram);
    if (own.variance <= kMinTargetVariance) {
        throw NumericalError("mean_term: target kriging variance below threshold");
    }
    const ErrorMoments other = error_moments(h, target, wrong_mean_model, gram);
    return other.mean * other.mean / own.second_moment;
}

const RatioRecord* RatioTable::Level::find(std::string_view target_id) const {
    const auto it =
        std::find_if(records.begin(), records.end(), [&](const RatioRecord& r) { return r.target_id == target_id; });
    return it == records.end() ? nullptr : &*it;
}

namespace {

RatioTable run_levels(const GaussianModel& true_model, const GaussianModel& wrong_model, const DesignSource& designs,
                      const TargetSource& targets, const std::vector<int>& n_schedule, const RatioLimits& limits,
                      std::vector<std::exception_ptr>& errors) {
    if (n_schedule.empty()) {
        throw InvalidArgument("ratio_convergence: empty schedule");
    }
    for (std::size_t i = 1; i < n_schedule.size(); ++i) {
        if (n_schedule[i] <= n_schedule[i - 1]) {
            throw InvalidArgument("ratio_convergence: schedule must be strictly increasing");
        }
    }
    RatioTable table;
    table.true_label = true_model.label;
    table.wrong_label = wrong_model.label;
    table.levels.resize(n_schedule.size());
    errors.assign(n_schedule.size(), nullptr);
    detail::parallel_for(n_schedule.size(), [&](std::size_t i) {
        try {
            const int n = n_schedule[i];
            const Design design = designs(n);
            RatioSet set = efficiency_ratios(design, targets(design, n), true_model, wrong_model, limits);
            table.levels[i] = {n, std::move(set.records), std::move(set.warnings)};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    return table;
}

}  // namespace

RatioTable ratio_convergence(const GaussianModel& true_model, const GaussianModel& wrong_model,
                             const DesignSource& designs, const TargetSource& targets,
                             const std::vector<int>& n_schedule, const RatioLimits& limits) {
    std::vector<std::exception_ptr> errors;
    RatioTable table = run_levels(true_model, wrong_model, designs, targets, n_schedule, limits, errors);
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return table;
}

RatioTable ratio_convergence_partial(const GaussianModel& true_model, const GaussianModel& wrong_model,
                                     const DesignSource& designs, const TargetSource& targets,
                                     const std::vector<int>& n_schedule, const RatioLimits& limits) {
    std::vector<std::exception_ptr> errors;
    RatioTable table = run_levels(true_model, wrong_model, designs, targets, n_schedule, limits, errors);
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[i]);
        } catch (const NumericalError& e) {
            table.failure = "n=" + std::to_string(n_schedule[i]) + ": " + e.what();
            table.levels.resize(i);
            return table;
        }
    }
    return table;
}

std::vector<std::string> check_record_invariants(const RatioRecord& record, double tol) {
    std::vector<std::string> bad;
    const auto where = "n=" + std::to_string(record.n) + " target=" + record.target_id + ": ";
    for (const RatioName r : kAllRatios) {
        if (!std::isfinite(record[r].value)) {
            bad.push_back(where + std::string(ratio_name(r)) + " is not finite");
        }
    }
    for (const RatioName r : {RatioName::RVar1, RatioName::RVar2, RatioName::RMom1, RatioName::RMom2}) {
        if (record[r].value < 1.0 - tol) {
            bad.push_back(where + std::string(ratio_name(r)) + " = " + std::to_string(record[r].value) + " < 1");
        }
    }
    if (!record.moments) {
        return bad;
    }
    const auto& q = *record.moments;
    // Var[h~-h]/Var[h-h] = (Var[h~-h]/V~[h~-h]) (V~[h~-h]/V~[h-h]) (V~[h-h]/Var[h-h])
    const double chain = (q.true_of_wrong.variance / q.wrong_of_wrong.variance) *
                         (q.wrong_of_wrong.variance / q.wrong_of_true.variance) *
                         (q.wrong_of_true.variance / q.true_of_true.variance);
    const double r1 = record[RatioName::RVar1].value;
    if (std::abs(chain - r1) > tol * std::max(1.0, std::abs(r1))) {
        bad.push_back(where + "chain identity violated: " + std::to_string(chain) + " vs " + std::to_string(r1));
    }
    // r_mom_3 E[(h-h)^2] = r_var_3 Var[h-h] + E~[h-h]^2
    const double lhs = record[RatioName::RMom3].value * q.true_of_true.second_moment;
    const double rhs = record[RatioName::RVar3].value * q.true_of_true.variance +
                       q.wrong_of_true.mean * q.wrong_of_true.mean;
    if (std::abs(lhs - rhs) > tol * std::max(1.0, std::abs(lhs))) {
        bad.push_back(where + "second-moment decomposition violated");
    }
    return bad;
}

unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("MISSPEC_KRIGE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(cap, &end, 10);
        if (end != cap && *end == '\0' && v >= 1) {
            n = std::min<unsigned>(n, static_cast<unsigned>(v));
        }
    }
    return n;
}

}  // namespace misspec
