#ifndef DOSEINS_TOOLS_RUN_CONFIG_HPP
#define DOSEINS_TOOLS_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doseins_tools/json_io.hpp"

namespace doseins {

inline constexpr const char* kConfigEnvVar = "DOSEINS_CONFIG";

struct RunConfig {
  std::uint64_t seed = 20240101;
  int replicates = 1000;
  int workers = 1;
  std::string output_dir = "out";
  std::vector<std::string> scenarios;
  std::vector<Variant> variants;
  std::vector<AdaptiveMode> adaptive_modes{AdaptiveMode::kNone};
  std::vector<double> c_values{0.0, 0.1, 0.2, 1.0};
  json engine = json::object();
  json random = json::object();
  int audit = 0;  // replicates per cell whose audit log is written

  /// Everything that determines the results; workers and output_dir are omitted.
  json echo() const;
  /// One spec per (scenario, variant, mode, c); plain variants get a single
  /// cell per scenario with mode "none".
  std::vector<BatchSpec> cells() const;
};

RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// "T2", "T2E3", "random", "random-monotone" or "random-unimodal".
bool is_random_label(const std::string& label);
EfficacyShape random_label_shape(const std::string& label);

}  // namespace doseins

#endif  // DOSEINS_TOOLS_RUN_CONFIG_HPP
