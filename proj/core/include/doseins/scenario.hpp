#ifndef DOSEINS_SCENARIO_HPP
#define DOSEINS_SCENARIO_HPP

// Ground-truth generators: the fixed toxicity/efficacy table with historical
// data, and the random five-position recipes.

#include <optional>
#include <string>
#include <vector>

#include "doseins/rng.hpp"
#include "doseins/skeleton.hpp"

namespace doseins {

struct ScenarioTruth {
  std::string label;
  std::vector<double> doses;
  std::vector<double> p;
  std::vector<double> q;
  std::optional<std::size_t> inserted_index;
  std::optional<std::size_t> true_mtd;
  std::optional<std::size_t> true_obd;
};

/// argmin |p - phi1|; ties go to the higher dose.
std::optional<std::size_t> true_mtd(const std::vector<double>& p, double phi1);
/// Highest q among doses with p <= phi1 (lower dose on ties); none if no dose qualifies.
std::optional<std::size_t> true_obd(const std::vector<double>& p, const std::vector<double>& q, double phi1);

struct FixedScenario {
  ScenarioTruth truth;  // five doses, d* included
  DoseGrid trial_grid;  // the four planned doses
  DoseData history;     // observed on trial_grid before insertion
  double d_star = 2100;
  int tox_row = 1;
  int eff_row = 1;
};

/// All nine toxicity x efficacy combinations, labelled "T1E1" .. "T3E3".
std::vector<FixedScenario> fixed_scenarios(double phi1 = 0.30);

/// Accepts "T2E3" or a bare "T2" (efficacy row 1). Throws std::invalid_argument.
FixedScenario fixed_scenario(const std::string& label, double phi1 = 0.30);

enum class EfficacyShape { kMonotone, kUnimodal };
enum class InsertedTruthMode { kVerbatim, kZMidpoint };

struct RandomGenParams {
  double phi = 0.30;
  double sigma0 = 0.05;
  double sigma_star = 0.05;
  double mu1 = -0.20;
  double mu2 = 0.80;
  double sigma1 = 0.5;
  double sigma2 = 0.5;
  double delta1 = 0.5;
  double q_max = 0.8;
  EfficacyShape shape = EfficacyShape::kMonotone;
  InsertedTruthMode inserted_mode = InsertedTruthMode::kVerbatim;
  std::vector<double> doses{300, 900, 1500, 2100, 2400};

  /// mu1 = phi - 0.5 and mu2 = phi + 0.5.
  static RandomGenParams for_target(double phi);
  void validate() const;
};

struct RandomToxicity {
  std::size_t pivot = 2;  // 0-based position removed from the planned ladder
  std::vector<double> p;  // five positions
};

/// Draw order: pivot, eps_j, eps_{j-1}, eps_{j+1}, then the lower tail
/// outward, then the upper tail outward.
RandomToxicity random_toxicity(RngStream& rng, const RandomGenParams& params);

/// Phi(eps*) with eps* ~ N((p_high - p_low) / 2, sigma*^2), or
/// centred at the z-scale midpoint in kZMidpoint mode.
double inserted_dose_truth(RngStream& rng, double p_low, double p_high, double sigma_star,
                           InsertedTruthMode mode = InsertedTruthMode::kVerbatim);

/// Draw order: anchor index, anchor value, then (unimodal) peak index, peak
/// value and sorted bridge values, then the lower and upper tails.
std::vector<double> random_efficacy(RngStream& rng, const RandomGenParams& params, std::size_t positions = 5);

struct RandomScenario {
  RandomToxicity toxicity;
  std::vector<double> q;
  std::vector<double> doses;

  DoseGrid trial_grid() const;  // planned ladder without the pivot
  std::vector<double> trial_p() const;
  std::vector<double> trial_q() const;
};

RandomScenario random_scenario(RngStream& rng, const RandomGenParams& params);

std::string to_string(EfficacyShape s);
std::string to_string(InsertedTruthMode m);
EfficacyShape parse_efficacy_shape(const std::string& s);
InsertedTruthMode parse_inserted_truth_mode(const std::string& s);

}  // namespace doseins

#endif  // DOSEINS_SCENARIO_HPP
