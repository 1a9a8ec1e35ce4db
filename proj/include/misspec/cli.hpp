#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "misspec/diagnostics.hpp"
#include "misspec/errors.hpp"
#include "misspec/harness.hpp"

namespace misspec::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

/// Malformed or schema-invalid configuration.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// ---------------------------------------------------------------------------
// Configs. Every parser rejects unknown keys at every level.

struct RunConfig {
    Scenario scenario;
    std::filesystem::path output_dir;
    DiagnosticBudget budget;
};

struct CheckConfig {
    ModelSpec truth;
    ModelSpec wrong;
    DiagnosticBudget budget;
};

struct EigenConfig {
    KernelSpec kernel;
    Quadrature grid;
    std::string grid_label;
    double rank_cutoff = 1e-12;
    std::filesystem::path output;
};

json load_json(const std::filesystem::path& path);

Domain parse_domain(const json& j);
MeanSpec parse_mean(const json& j, const Domain& domain);
KernelSpec parse_kernel(const json& j, const Domain& domain);
ModelSpec parse_model(const json& j, const Domain& domain, const std::string& default_label);
DesignGenerator parse_design(const json& j, const Domain& domain);
TargetSetSpec parse_targets(const json& j, const Domain& domain);
DiagnosticBudget parse_tolerances(const json& j);
Quadrature parse_grid(const json& j, const Domain& domain, std::string& label);

RunConfig parse_run_config(const json& j);
CheckConfig parse_check_config(const json& j);
EigenConfig parse_eigen_config(const json& j);

// ---------------------------------------------------------------------------
// Output

/// %.17g without locale: 17 significant digits, "." as the decimal point.
std::string format_double(double v);

inline constexpr const char* kRatiosHeader = "scenario,n,target_id,ratio_name,value,limit,abs_dev";

void write_ratios_csv(std::ostream& os, const std::vector<ScenarioResult>& results);
json to_json(const RatioVerdict& v);
json to_json(const AssumptionReport& r);
json diagnostics_json(const std::vector<Scenario>& scenarios, const std::vector<ScenarioResult>& results);
void write_eigen_csv(std::ostream& os, const NystromEigen& e);

/// Writes `content` next to `path` and renames it into place.
void write_file_atomically(const std::filesystem::path& path, const std::string& content);

// ---------------------------------------------------------------------------
// Commands; each returns one of the exit codes above.

int cmd_run(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_check(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_eigen(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_list_scenarios(std::ostream& out);
int cmd_version(std::ostream& out);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace misspec::cli
