#ifndef DOSEINS_TOOLS_CLI_HPP
#define DOSEINS_TOOLS_CLI_HPP

#include <optional>
#include <ostream>
#include <string>

#include "doseins/design.hpp"

namespace doseins {

struct BoundaryTableOptions {
  ToxicityTargets targets;
  std::optional<EfficacyTargets> efficacy;  // set for BOIN-ET tables
  std::optional<int> s;
  std::optional<int> s_eff;
  std::optional<double> r;
  std::optional<double> v;
  int n_max = 12;
  bool csv = false;
};

/// Non-informative table, or the informative one when `s` is set.
std::string boundary_table(const BoundaryTableOptions& opts);

/// Entry point; exit codes: 0 success, 1 runtime failure, 2 invalid usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace doseins

#endif  // DOSEINS_TOOLS_CLI_HPP
