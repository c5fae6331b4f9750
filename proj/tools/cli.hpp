#pragma once

// Scenario runner behind the mcd command line tool.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mcdcli {

enum ExitCode { kPass = 0, kConfigError = 2, kNumericalError = 3, kAssertionFailed = 4 };

struct Overrides {
  std::optional<double> grid_step;
  std::optional<double> x_max;
  std::optional<double> seed_tolerance;
};

/// Bundled scenario names, in catalog order.
const std::vector<std::string>& catalog();
/// Directory holding the bundled configs (MCD_SCENARIO_DIR, else the build-time path).
std::string scenario_dir();
/// A bare name with a bundled config maps to <scenario_dir>/<name>.json; anything else is a path.
std::string resolve_config(const std::string& name_or_path);

/// Parse and check the config without computing anything.
int validate_scenario(const std::string& config, std::ostream& err);
/// Run the pipeline, write CSV files and manifest.json into out_dir.
int run_scenario(const std::string& config, const std::string& out_dir, const Overrides& ov, std::ostream& log,
                 std::ostream& err);

}  // namespace mcdcli
