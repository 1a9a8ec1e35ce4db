#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <system_error>
#include <unistd.h>

#include "misspec/cli.hpp"

namespace misspec::cli {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const VerdictEvidence& e) {
    return {{"window_start", e.window_start},
            {"window_mean", e.window_mean},
            {"max_rel_deviation", e.max_rel_deviation},
            {"checkpoints", e.checkpoints}};
}

json to_json(const AnalyticLimit& a) { return {{"kind", to_string(a.kind)}, {"a", optional_number(a.a)}}; }

json to_json(const ModelSpec& m) {
    return {{"label", m.label}, {"mean", m.mean.describe()}, {"kernel", make_kernel(m.kernel)->describe()}};
}

json ratio_json(const RatioRecord& r) {
    json out = json::object();
    for (const RatioName name : kAllRatios) {
        out[std::string(ratio_name(name))] = r[name].value;
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_ratios_csv(std::ostream& os, const std::vector<ScenarioResult>& results) {
    os << kRatiosHeader << '\n';
    for (const auto& res : results) {
        for (const auto& level : res.table.levels) {
            for (const auto& rec : level.records) {
                for (const RatioName name : kAllRatios) {
                    const RatioValue& v = rec[name];
                    os << res.scenario << ',' << level.n << ',' << rec.target_id << ',' << ratio_name(name) << ','
                       << format_double(v.value) << ',' << (v.limit ? format_double(*v.limit) : "") << ','
                       << (v.limit ? format_double(v.abs_dev()) : "") << '\n';
                }
            }
        }
    }
}

json to_json(const RatioVerdict& v) {
    return {{"kind", to_string(v.kind)}, {"a", optional_number(v.a_estimate)}, {"evidence", to_json(v.evidence)}};
}

json to_json(const AssumptionReport& r) {
    json out;
    out["route"] = r.route;
    out["analytic"] = to_json(r.analytic);
    out["eigen_verdict"] = r.eigen_verdict ? to_json(*r.eigen_verdict) : json(nullptr);
    out["spectral_verdict"] = r.spectral_verdict ? to_json(*r.spectral_verdict) : json(nullptr);
    out["equivalence"] =
        r.equivalence ? json{{"k_hat", r.equivalence->k_hat}, {"K_hat", r.equivalence->K_hat}} : json(nullptr);
    if (r.t_a) {
        const auto& t = *r.t_a;
        out["t_a"] = {{"a", t.a_used},
                      {"basis_size", t.basis_size},
                      {"tail_index", t.tail_index},
                      {"tail_tol", t.tail_tol},
                      {"hilbert_schmidt_sq", t.hilbert_schmidt_sq},
                      {"galerkin_eigs", std::vector<double>(t.galerkin_eigs.begin(), t.galerkin_eigs.end())}};
    } else {
        out["t_a"] = nullptr;
    }
    out["assumption_I"] = to_string(r.assumption_I);
    out["assumption_II"] = to_string(r.assumption_II);
    out["assumption_III"] = to_string(r.assumption_III);
    out["notes"] = r.notes;
    return out;
}

json diagnostics_json(const std::vector<Scenario>& scenarios, const std::vector<ScenarioResult>& results) {
    json all = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const Scenario& s = scenarios[i];
        const ScenarioResult& r = results[i];
        json levels = json::array();
        for (std::size_t k = 0; k < r.table.levels.size(); ++k) {
            const auto& level = r.table.levels[k];
            json lj{{"n", level.n}, {"targets", level.records.size() - 1}, {"warnings", level.warnings},
                    {"sup", ratio_json(level.sup())}};
            if (k < r.conditioning.size()) {
                const auto& c = r.conditioning[k];
                lj["min_distance"] = c.min_distance;
                lj["cond_true"] = std::isfinite(c.cond_true) ? json(c.cond_true) : json("inf");
                lj["cond_wrong"] = std::isfinite(c.cond_wrong) ? json(c.cond_wrong) : json("inf");
            }
            levels.push_back(std::move(lj));
        }
        all.push_back({{"scenario", s.name},
                       {"description", s.description},
                       {"true_model", to_json(s.true_model)},
                       {"wrong_model", to_json(s.wrong_model)},
                       {"design", s.design.describe()},
                       {"targets", r.table.target_label},
                       {"schedule", s.schedule},
                       {"limit_a", optional_number(scenario_limit(s))},
                       {"failure", r.failure ? json(*r.failure) : json(nullptr)},
                       {"levels", std::move(levels)},
                       {"assumptions", r.report ? to_json(*r.report) : json(nullptr)}});
    }
    return {{"schema", kSchemaVersion}, {"version", kVersion}, {"scenarios", std::move(all)}};
}

void write_eigen_csv(std::ostream& os, const NystromEigen& e) {
    os << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < e.all_eigenvalues.size(); ++i) {
        os << i << ',' << format_double(e.all_eigenvalues[i]) << '\n';
    }
}

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::filesystem::filesystem_error("cannot write output", tmp,
                                                    std::make_error_code(std::errc::io_error));
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace misspec::cli
