#ifndef DOSEINS_SIMULATION_HPP
#define DOSEINS_SIMULATION_HPP

// Monte-Carlo harness. Replicate r draws from streams derived from
// (master_seed, 4r + k): k = 0 scenario, 1 engine ties, 2 inserted-dose
// truth, 3 patient outcomes. Patient outcomes are common random numbers
// addressed by (dose uid, patient index), so designs compared under one
// seed see the same patients.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "doseins/scenario.hpp"
#include "doseins/trial.hpp"

namespace doseins {

inline constexpr std::size_t kInsertedUid = 10;
inline constexpr std::size_t kPositions = 5;

struct BatchSpec {
  std::string scenario = "T1";  // fixed label, or "random"
  RandomGenParams random;
  EngineConfig engine;
  int replicates = 1000;
  std::uint64_t master_seed = 20240101;
  int workers = 1;

  bool is_random() const { return scenario == "random"; }
  void validate() const;
};

struct CohortEvent {
  CohortOutcome outcome;
  CohortRecord record;
};

struct InsertionEvent {
  double d_star = 0;
  bool force = false;
  InsertionRecord record;
};

using TraceEvent = std::variant<CohortEvent, InsertionEvent>;

/// Everything needed to drive the engine through the same trial again.
struct TrialTrace {
  DoseGrid grid;
  DoseData data;
  std::size_t current = 0;
  std::uint64_t tie_key = 0;
  std::uint64_t tie_counter = 0;
  std::vector<TraceEvent> events;
};

struct TrialOutcome {
  int replicate = 0;
  bool excluded = false;  // no insertion happened (random mode)
  bool inserted = false;
  ScenarioTruth truth;    // on the final grid
  std::optional<std::size_t> mtd;
  std::optional<std::size_t> obd;
  std::vector<int> allocation;  // final n per dose
  int discard_events = 0;
  TrialStatus status = TrialStatus::kActive;
  std::optional<TrialTrace> trace;
};

TrialOutcome run_trial(const BatchSpec& spec, int replicate, bool keep_trace = false);

struct BatchMetrics {
  std::string scenario;
  Variant variant = Variant::kBoin;
  AdaptiveMode adaptive = AdaptiveMode::kNone;
  double c = 1.0;
  int replicates = 0;
  int excluded = 0;
  int inserted = 0;
  int discard_events = 0;
  double pct_correct_mtd = 0;
  std::optional<double> pct_correct_obd;  // efficacy designs only
  double pct_over_mtd = 0;
  double pct_overly_toxic = 0;
  std::vector<double> avg_allocation;      // per position
  std::vector<double> pct_selected;        // per position
  double pct_no_selection = 0;
};

/// Replicates run on `spec.workers` threads; the fold is ordered by replicate.
BatchMetrics run_batch(const BatchSpec& spec);

/// Fold already-computed outcomes (in replicate order).
BatchMetrics summarize(const BatchSpec& spec, const std::vector<TrialOutcome>& outcomes);

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const BatchMetrics& m);

}  // namespace doseins

#endif  // DOSEINS_SIMULATION_HPP
