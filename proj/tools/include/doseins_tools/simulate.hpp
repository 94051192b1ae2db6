#ifndef DOSEINS_TOOLS_SIMULATE_HPP
#define DOSEINS_TOOLS_SIMULATE_HPP

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "doseins_tools/run_config.hpp"

namespace doseins {

/// "# config=<echo>" line, header, one row per cell.
std::string metrics_csv(const RunConfig& cfg, const std::vector<BatchMetrics>& metrics);
json metrics_json(const RunConfig& cfg, const std::vector<BatchMetrics>& metrics);

/// Bar chart of pct_correct_mtd per cell.
std::string render_bar_chart(const std::vector<BatchMetrics>& metrics, const std::string& title);

struct SimulationOutputs {
  std::vector<BatchMetrics> metrics;
  std::vector<std::filesystem::path> files;
};

/// Runs every cell and writes metrics.csv, metrics.json, correct_mtd.svg,
/// manifest.json and the requested audit logs under cfg.output_dir.
SimulationOutputs run_simulation(const RunConfig& cfg, std::ostream* progress = nullptr);

std::string project_version();

}  // namespace doseins

#endif  // DOSEINS_TOOLS_SIMULATE_HPP
