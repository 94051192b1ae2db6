#ifndef DOSEINS_TRIAL_HPP
#define DOSEINS_TRIAL_HPP

// Sequential trial state machine shared by simulation and live conduct.
//
// A cohort moves the state through: record outcomes -> elimination ->
// skeleton adaptation (inserted dose only) -> borrowing guard -> dose
// decision -> insertion trigger -> stopping. Insertion itself is a separate
// transition (insert_dose) so that a simulator and a human operator drive the
// engine through exactly the same calls and produce the same records.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "doseins/adaptive.hpp"
#include "doseins/design.hpp"
#include "doseins/rng.hpp"
#include "doseins/skeleton.hpp"

namespace doseins {

enum class Variant { kBoin, kHybridIboin, kBoinEt, kHybridIboinEt };
enum class AdaptiveMode { kNone, kHedge, kFtl, kMixtureBlend, kMixtureMap };
enum class TrialStatus { kActive, kAwaitingInsertion, kStoppedMaxN, kStoppedStayCap, kStoppedAllEliminated };
enum class Action { kEscalate, kStay, kDeescalate, kChoose };
enum class GuardResult { kBorrow, kDiscard };

bool is_efficacy_design(Variant v);
bool is_hybrid(Variant v);

std::string_view to_string(Variant v);
std::string_view to_string(AdaptiveMode m);
std::string_view to_string(TrialStatus s);
std::string_view to_string(Action a);
std::string_view to_string(GuardResult g);
/// Inverse of to_string; throws std::invalid_argument on unknown names.
Variant parse_variant(std::string_view s);
AdaptiveMode parse_adaptive_mode(std::string_view s);
TrialStatus parse_status(std::string_view s);

struct EngineConfig {
  Variant variant = Variant::kBoin;
  AdaptiveMode adaptive = AdaptiveMode::kNone;
  ToxicityTargets targets;
  EfficacyTargets efficacy;
  int cohort_size = 3;
  int n_initial = 24;
  int n_after_insert = 30;
  int per_dose_cap = 12;
  double elim_tox_threshold = 0.95;
  double elim_eff_threshold = 0.99;
  int elim_min_n = 3;      // toxicity elimination needs this many patients
  int trigger_min_n = 3;   // each gap dose needs this many before insertion can trigger
  double borrow_threshold = 1.0;  // c
  double hedge_initial_weight = 0.5;  // weight of the previous skeleton at insertion
  bool insertion_enabled = true;
  SkeletonConfig skeleton;

  /// Defaults for the variant family: phi2 = 0.6 phi1 (BOIN) or 0.1 phi1 (BOIN-ET).
  static EngineConfig defaults(Variant v, double phi1 = 0.30);
  void validate() const;
};

struct InsertedDose {
  std::size_t index = 0;
  double dose = 0;
  std::optional<SkeletonBundle> bundle;  // as computed at insertion (hybrid variants)
  double r0 = 0.5;                       // toxicity skeleton at insertion
  std::optional<double> v0;              // efficacy skeleton at insertion
  double r = 0.5;                        // toxicity skeleton in force
  std::optional<double> v;               // efficacy skeleton in force
  int s_tox = 0;
  int s_eff = 0;
  WeightState tox_weights;
  WeightState eff_weights;
  CandidateSet tox_candidates;
  CandidateSet eff_candidates;
};

using Gap = std::pair<std::size_t, std::size_t>;

struct TrialState {
  DoseGrid grid;
  DoseData data;
  std::size_t current = 0;
  std::vector<bool> tox_eliminated;
  std::vector<bool> eff_eliminated;
  std::optional<InsertedDose> inserted;
  std::optional<Gap> pending_gap;
  bool insertion_declined = false;
  int enrolled = 0;
  int n_total = 24;
  TrialStatus status = TrialStatus::kActive;
  RngStream rng;
  int cohorts = 0;
  int discard_events = 0;
};

/// Fresh trial at `start` with no data.
TrialState make_trial(DoseGrid grid, const EngineConfig& cfg, RngStream rng, std::size_t start = 0);

/// Trial resuming from already observed data (no elimination is re-evaluated).
TrialState resume_trial(DoseGrid grid, DoseData data, std::size_t current, const EngineConfig& cfg, RngStream rng);

struct BoundariesInForce {
  bool efficacy = false;
  bool informative = false;
  double escalate = 0;    // lambda_e or lambda1
  double deescalate = 0;  // lambda_d or lambda2
  double eta = 0;         // efficacy designs only
};

/// Boundaries that decide_next_dose would apply at dose `j` with its current n.
BoundariesInForce boundaries_at(const TrialState& state, std::size_t j, const EngineConfig& cfg);

struct GuardCheck {
  GuardResult result = GuardResult::kBorrow;
  double p_hat = 0;
  double p_borrow = 0;
};

/// Compare t/n at the inserted dose with (t + s r) / (n + s). Requires n >= 1.
GuardCheck borrowing_guard(const TrialState& state, const EngineConfig& cfg);

struct Decision {
  Action action = Action::kStay;
  std::optional<std::size_t> next;  // empty when no admissible dose remains
  BoundariesInForce boundaries;
  std::optional<GuardCheck> guard;
};

/// Decision at the current dose; consumes `rng` only for BOIN-ET ties.
Decision decide_next_dose(const TrialState& state, const EngineConfig& cfg, RngStream& rng);

/// Posterior elimination checks at the current dose.
TrialState apply_elimination(TrialState state, const EngineConfig& cfg);

/// Gap (g-1, g) when a de-escalation from g would trigger an insertion.
std::optional<Gap> insertion_trigger(const TrialState& state, const Decision& decision, const EngineConfig& cfg);

/// Terminal status implied by a decision (kActive if the trial continues).
TrialStatus check_stopping(const TrialState& state, const Decision& decision, const EngineConfig& cfg);

struct CohortOutcome {
  int patients = 3;
  int dlt = 0;
  int responses = 0;
};

struct CohortRecord {
  int sequence = 0;
  std::size_t dose_index = 0;
  double dose = 0;
  CohortOutcome cohort;
  DoseCounts counts;  // totals at the dose after the cohort
  std::vector<std::size_t> newly_eliminated;
  BoundariesInForce boundaries;
  std::optional<GuardCheck> guard;
  std::optional<double> skeleton_tox;
  std::optional<double> skeleton_eff;
  std::optional<int> s_tox;
  std::optional<int> s_eff;
  std::vector<double> tox_weights;
  std::vector<double> eff_weights;
  Action action = Action::kStay;
  std::optional<std::size_t> next_index;
  std::optional<Gap> trigger;
  int enrolled = 0;
  TrialStatus status = TrialStatus::kActive;
};

struct InsertionRecord {
  int sequence = 0;
  std::size_t index = 0;
  double dose = 0;
  bool forced = false;
  std::vector<double> grid;
  std::optional<SkeletonBundle> bundle;
  std::optional<double> skeleton_tox;
  std::optional<double> skeleton_eff;
  int s_tox = 0;
  int s_eff = 0;
  int n_total = 0;
  TrialStatus status = TrialStatus::kActive;
};

struct StepResult {
  TrialState state;
  CohortRecord record;
};

/// Throws std::domain_error on invalid counts or a non-active trial; the
/// input state is never modified.
StepResult step(const TrialState& state, const CohortOutcome& outcome, const EngineConfig& cfg);

struct InsertResult {
  TrialState state;
  InsertionRecord record;
};

/// Insert d* into the pending gap (or, when `force`, into whichever gap holds it).
InsertResult insert_dose(const TrialState& state, double d_star, const EngineConfig& cfg, bool force = false);

/// Operator declines the pending insertion; the trial continues without it.
TrialState decline_insertion(TrialState state);

struct Selection {
  std::optional<std::size_t> dose;
  std::vector<double> estimates;  // isotonic toxicity estimates, NaN where untried or excluded
};

/// Nearest-to-target on weighted isotonic estimates; ties go to the higher
/// dose when both are below phi1, otherwise to the lower dose.
std::optional<std::size_t> select_mtd_from_estimates(const std::vector<double>& estimates, double phi1);

Selection select_mtd(const TrialState& state, const EngineConfig& cfg);
Selection select_obd(const TrialState& state, const EngineConfig& cfg);

}  // namespace doseins

#endif  // DOSEINS_TRIAL_HPP
