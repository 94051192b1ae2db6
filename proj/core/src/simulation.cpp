#include "doseins/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace doseins {

void BatchSpec::validate() const {
  if (replicates < 1) throw std::domain_error("replicates must be >= 1");
  if (workers < 1) throw std::domain_error("workers must be >= 1");
  engine.validate();
  if (is_random()) {
    random.validate();
  } else {
    (void)fixed_scenario(scenario, engine.targets.phi1);
  }
}

namespace {

struct Running {
  TrialState state;
  std::vector<std::size_t> uid;
  std::vector<double> p;
  std::vector<double> q;
};

void run_cohorts_until_pause(Running& run, const EngineConfig& cfg, std::uint64_t outcome_key,
                             std::optional<TrialTrace>& trace) {
  while (run.state.status == TrialStatus::kActive && !run.state.pending_gap) {
    const std::size_t j = run.state.current;
    CohortOutcome o;
    o.patients = cfg.cohort_size;
    for (int i = 0; i < o.patients; ++i) {
      const auto k = static_cast<std::uint64_t>(run.state.data[j].n + i);
      if (counter_uniform(outcome_key, run.uid[j], k, 0) < run.p[j]) ++o.dlt;
      if (counter_uniform(outcome_key, run.uid[j], k, 1) < run.q[j]) ++o.responses;
    }
    auto next = step(run.state, o, cfg);
    run.state = std::move(next.state);
    if (trace) trace->events.emplace_back(CohortEvent{o, std::move(next.record)});
  }
}

void insert(Running& run, std::size_t lower, double d_star, double p_star, double q_star, bool force,
            const EngineConfig& cfg, std::optional<TrialTrace>& trace) {
  auto res = insert_dose(run.state, d_star, cfg, force);
  run.state = std::move(res.state);
  const auto at = static_cast<std::ptrdiff_t>(lower + 1);
  run.uid.insert(run.uid.begin() + at, kInsertedUid);
  run.p.insert(run.p.begin() + at, p_star);
  run.q.insert(run.q.begin() + at, q_star);
  if (trace) trace->events.emplace_back(InsertionEvent{d_star, force, std::move(res.record)});
}

std::optional<TrialTrace> start_trace(const TrialState& s, bool keep) {
  if (!keep) return std::nullopt;
  TrialTrace t;
  t.grid = s.grid;
  t.data = s.data;
  t.current = s.current;
  t.tie_key = s.rng.key();
  t.tie_counter = s.rng.counter();
  return t;
}

std::vector<std::size_t> identity_uids(std::size_t n) {
  std::vector<std::size_t> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = k;
  return u;
}

}  // namespace

TrialOutcome run_trial(const BatchSpec& spec, int replicate, bool keep_trace) {
  const EngineConfig& cfg = spec.engine;
  const auto base = static_cast<std::uint64_t>(replicate) * 4;
  RngStream ties(spec.master_seed, base + 1);
  RngStream truth_rng(spec.master_seed, base + 2);
  const std::uint64_t outcome_key = derive_key(spec.master_seed, base + 3);

  TrialOutcome out;
  out.replicate = replicate;
  Running run;
  std::optional<TrialTrace> trace;

  if (!spec.is_random()) {
    const FixedScenario fs = fixed_scenario(spec.scenario, cfg.targets.phi1);
    run.state = resume_trial(fs.trial_grid, fs.history, fs.trial_grid.size() - 1, cfg, ties);
    run.uid = identity_uids(fs.trial_grid.size());
    run.p = fs.truth.p;
    run.q = fs.truth.q;
    const std::size_t ins = *fs.truth.inserted_index;
    run.p.erase(run.p.begin() + static_cast<std::ptrdiff_t>(ins));
    run.q.erase(run.q.begin() + static_cast<std::ptrdiff_t>(ins));
    trace = start_trace(run.state, keep_trace);
    insert(run, ins - 1, fs.d_star, fs.truth.p[ins], fs.truth.q[ins], true, cfg, trace);
    out.truth.label = fs.truth.label;
    run_cohorts_until_pause(run, cfg, outcome_key, trace);
  } else {
    RngStream scen_rng(spec.master_seed, base + 0);
    const RandomScenario sc = random_scenario(scen_rng, spec.random);
    run.state = make_trial(sc.trial_grid(), cfg, ties, 0);
    run.uid = identity_uids(run.state.grid.size());
    run.p = sc.trial_p();
    run.q = sc.trial_q();
    out.truth.label = "random";
    trace = start_trace(run.state, keep_trace);
    for (;;) {
      run_cohorts_until_pause(run, cfg, outcome_key, trace);
      if (!run.state.pending_gap) break;
      const auto [a, b] = *run.state.pending_gap;
      const bool spans_pivot = a + 1 == sc.toxicity.pivot;
      const double d_star = spans_pivot ? sc.doses[sc.toxicity.pivot]
                                        : (run.state.grid.doses[a] + run.state.grid.doses[b]) / 2;
      const double p_star =
          inserted_dose_truth(truth_rng, run.p[a], run.p[b], spec.random.sigma_star, spec.random.inserted_mode);
      const double q_star = spans_pivot ? sc.q[sc.toxicity.pivot] : (run.q[a] + run.q[b]) / 2;
      insert(run, a, d_star, p_star, q_star, false, cfg, trace);
    }
  }

  const TrialState& s = run.state;
  out.inserted = s.inserted.has_value();
  out.excluded = !out.inserted;
  out.truth.doses = s.grid.doses;
  out.truth.p = run.p;
  out.truth.q = run.q;
  if (s.inserted) out.truth.inserted_index = s.inserted->index;
  out.truth.true_mtd = true_mtd(run.p, cfg.targets.phi1);
  out.truth.true_obd = true_obd(run.p, run.q, cfg.targets.phi1);
  out.mtd = select_mtd(s, cfg).dose;
  if (is_efficacy_design(cfg.variant)) out.obd = select_obd(s, cfg).dose;
  for (const auto& c : s.data) out.allocation.push_back(c.n);
  out.discard_events = s.discard_events;
  out.status = s.status;
  out.trace = std::move(trace);
  return out;
}

BatchMetrics summarize(const BatchSpec& spec, const std::vector<TrialOutcome>& outcomes) {
  const EngineConfig& cfg = spec.engine;
  BatchMetrics m;
  m.scenario = spec.is_random() ? "random-" + to_string(spec.random.shape) : spec.scenario;
  m.variant = cfg.variant;
  m.adaptive = cfg.adaptive;
  m.c = cfg.borrow_threshold;
  m.replicates = static_cast<int>(outcomes.size());
  m.avg_allocation.assign(kPositions, 0.0);
  m.pct_selected.assign(kPositions, 0.0);
  const bool et = is_efficacy_design(cfg.variant);
  int included = 0;
  int correct_mtd = 0;
  int correct_obd = 0;
  int over = 0;
  int toxic = 0;
  int none = 0;
  for (const auto& o : outcomes) {
    if (o.inserted) ++m.inserted;
    m.discard_events += o.discard_events;
    if (o.excluded) {
      ++m.excluded;
      continue;
    }
    ++included;
    if (o.mtd == o.truth.true_mtd) ++correct_mtd;
    if (et && o.obd == o.truth.true_obd) ++correct_obd;
    if (o.mtd && o.truth.true_mtd && *o.mtd > *o.truth.true_mtd) ++over;
    if (o.mtd && o.truth.p[*o.mtd] > cfg.targets.phi3) ++toxic;
    if (!o.mtd) {
      ++none;
    } else if (*o.mtd < kPositions) {
      m.pct_selected[*o.mtd] += 1;
    }
    for (std::size_t k = 0; k < o.allocation.size() && k < kPositions; ++k) m.avg_allocation[k] += o.allocation[k];
  }
  if (included > 0) {
    const double pct = 100.0 / included;
    m.pct_correct_mtd = correct_mtd * pct;
    if (et) m.pct_correct_obd = correct_obd * pct;
    m.pct_over_mtd = over * pct;
    m.pct_overly_toxic = toxic * pct;
    m.pct_no_selection = none * pct;
    for (auto& x : m.pct_selected) x *= pct;
    for (auto& x : m.avg_allocation) x /= included;
  } else if (et) {
    m.pct_correct_obd = 0.0;
  }
  return m;
}

BatchMetrics run_batch(const BatchSpec& spec) {
  spec.validate();
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.replicates));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (int r = next++; r < spec.replicates; r = next++) {
      try {
        outcomes[static_cast<std::size_t>(r)] = run_trial(spec, r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::min(spec.workers, spec.replicates);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return summarize(spec, outcomes);
}

namespace {

std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

}  // namespace

void write_csv_header(std::ostream& os) {
  os << "scenario,variant,adaptive_mode,c,replicates,pct_correct_mtd,pct_correct_obd,pct_over_mtd,"
        "pct_overly_toxic,excluded,inserted";
  for (std::size_t k = 1; k <= kPositions; ++k) os << ",alloc_d" << k;
  os << '\n';
}

void write_csv_row(std::ostream& os, const BatchMetrics& m) {
  os << m.scenario << ',' << to_string(m.variant) << ',' << to_string(m.adaptive) << ','
     << (is_hybrid(m.variant) ? fixed4(m.c) : std::string("NA")) << ','
     << m.replicates << ',' << fixed4(m.pct_correct_mtd) << ','
     << (m.pct_correct_obd ? fixed4(*m.pct_correct_obd) : std::string("NA")) << ',' << fixed4(m.pct_over_mtd) << ','
     << fixed4(m.pct_overly_toxic) << ',' << m.excluded << ',' << m.inserted;
  for (double a : m.avg_allocation) os << ',' << fixed4(a);
  os << '\n';
}

}  // namespace doseins
