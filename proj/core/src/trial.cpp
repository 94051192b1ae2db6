#include "doseins/trial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "doseins/pava.hpp"
#include "doseins/stats.hpp"

namespace doseins {

// ---------------------------------------------------------------------------
// Names

bool is_efficacy_design(Variant v) { return v == Variant::kBoinEt || v == Variant::kHybridIboinEt; }
bool is_hybrid(Variant v) { return v == Variant::kHybridIboin || v == Variant::kHybridIboinEt; }

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBoin: return "boin";
    case Variant::kHybridIboin: return "hybrid-iboin";
    case Variant::kBoinEt: return "boinet";
    case Variant::kHybridIboinEt: return "hybrid-iboinet";
  }
  return "?";
}

std::string_view to_string(AdaptiveMode m) {
  switch (m) {
    case AdaptiveMode::kNone: return "none";
    case AdaptiveMode::kHedge: return "hedge";
    case AdaptiveMode::kFtl: return "ftl";
    case AdaptiveMode::kMixtureBlend: return "mixture-blend";
    case AdaptiveMode::kMixtureMap: return "mixture-map";
  }
  return "?";
}

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::kActive: return "active";
    case TrialStatus::kAwaitingInsertion: return "awaiting_insertion";
    case TrialStatus::kStoppedMaxN: return "stopped_max_n";
    case TrialStatus::kStoppedStayCap: return "stopped_stay_cap";
    case TrialStatus::kStoppedAllEliminated: return "stopped_all_eliminated";
  }
  return "?";
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kEscalate: return "escalate";
    case Action::kStay: return "stay";
    case Action::kDeescalate: return "de-escalate";
    case Action::kChoose: return "choose";
  }
  return "?";
}

std::string_view to_string(GuardResult g) { return g == GuardResult::kBorrow ? "borrow" : "discard"; }

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::kBoin, Variant::kHybridIboin, Variant::kBoinEt, Variant::kHybridIboinEt}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown design variant: " + std::string(s));
}

AdaptiveMode parse_adaptive_mode(std::string_view s) {
  for (AdaptiveMode m : {AdaptiveMode::kNone, AdaptiveMode::kHedge, AdaptiveMode::kFtl, AdaptiveMode::kMixtureBlend,
                         AdaptiveMode::kMixtureMap}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown adaptive mode: " + std::string(s));
}

TrialStatus parse_status(std::string_view s) {
  for (TrialStatus t : {TrialStatus::kActive, TrialStatus::kAwaitingInsertion, TrialStatus::kStoppedMaxN,
                        TrialStatus::kStoppedStayCap, TrialStatus::kStoppedAllEliminated}) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown trial status: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Config

EngineConfig EngineConfig::defaults(Variant v, double phi1) {
  EngineConfig cfg;
  cfg.variant = v;
  cfg.targets.phi1 = phi1;
  cfg.targets.phi2 = (is_efficacy_design(v) ? 0.1 : 0.6) * phi1;
  cfg.targets.phi3 = 1.4 * phi1;
  cfg.efficacy = {0.5, 0.3};
  cfg.skeleton.blrm = BlrmPrior::for_target(phi1);
  return cfg;
}

void EngineConfig::validate() const {
  targets.validate();
  if (is_efficacy_design(variant)) efficacy.validate();
  if (cohort_size < 1) throw std::domain_error("cohort size must be >= 1");
  if (n_initial < 1 || n_after_insert < n_initial) throw std::domain_error("need 1 <= n_initial <= n_after_insert");
  if (per_dose_cap < 1) throw std::domain_error("per-dose cap must be >= 1");
  for (double p : {elim_tox_threshold, elim_eff_threshold, hedge_initial_weight}) {
    if (!(p > 0 && p < 1)) throw std::domain_error("probability thresholds must lie in (0, 1)");
  }
  if (!(borrow_threshold >= 0)) throw std::domain_error("borrowing threshold c must be >= 0");
  for (double g : {skeleton.gamma1, skeleton.gamma2}) {
    if (!(g > 0 && g <= 1)) throw std::domain_error("ESS scaling factors must lie in (0, 1]");
  }
  if (elim_min_n < 0 || trigger_min_n < 0) throw std::domain_error("minimum counts must be >= 0");
}

// ---------------------------------------------------------------------------
// State construction

TrialState make_trial(DoseGrid grid, const EngineConfig& cfg, RngStream rng, std::size_t start) {
  DoseData data(grid.doses.size());
  TrialState s = resume_trial(std::move(grid), std::move(data), start, cfg, rng);
  return s;
}

TrialState resume_trial(DoseGrid grid, DoseData data, std::size_t current, const EngineConfig& cfg, RngStream rng) {
  cfg.validate();
  grid.validate();
  if (data.size() != grid.doses.size()) throw std::domain_error("data must cover every dose");
  if (current >= grid.doses.size()) throw std::domain_error("current dose out of range");
  TrialState s;
  s.grid = std::move(grid);
  s.data = std::move(data);
  s.current = current;
  s.tox_eliminated.assign(s.grid.size(), false);
  s.eff_eliminated.assign(s.grid.size(), false);
  for (const auto& c : s.data) {
    if (c.n < 0 || c.t < 0 || c.u < 0 || c.t > c.n || c.u > c.n) throw std::domain_error("invalid dose counts");
    if (c.n > cfg.per_dose_cap) throw std::domain_error("dose counts exceed the per-dose cap");
    s.enrolled += c.n;
  }
  s.n_total = s.grid.inserted_index ? cfg.n_after_insert : cfg.n_initial;
  if (s.enrolled > s.n_total) throw std::domain_error("enrolled patients exceed the sample size");
  s.rng = rng;
  return s;
}

// ---------------------------------------------------------------------------
// Boundaries and guard

namespace {

bool at_inserted(const TrialState& s, std::size_t j) { return s.inserted && s.inserted->index == j; }

PriorStrength strength_of(const InsertedDose& ins) {
  PriorStrength p;
  p.s = ins.s_tox;
  p.r = ins.r;
  p.v = ins.v;
  p.s_efficacy = ins.s_eff;
  return p;
}

BoundariesInForce non_informative(const EngineConfig& cfg) {
  BoundariesInForce b;
  if (is_efficacy_design(cfg.variant)) {
    const auto et = boinet_boundaries(cfg.targets, cfg.efficacy);
    b.efficacy = true;
    b.escalate = et.lambda1;
    b.deescalate = et.lambda2;
    b.eta = et.eta;
  } else {
    const auto tb = boin_boundaries(cfg.targets);
    b.escalate = tb.lambda_e;
    b.deescalate = tb.lambda_d;
  }
  return b;
}

BoundariesInForce informative(const InsertedDose& ins, int n, const EngineConfig& cfg) {
  BoundariesInForce b;
  b.informative = true;
  if (is_efficacy_design(cfg.variant)) {
    const auto prior = iboinet_hypothesis_prior(strength_of(ins), cfg.targets, cfg.efficacy);
    const auto et = iboinet_boundaries(prior, n, cfg.targets, cfg.efficacy);
    b.efficacy = true;
    b.escalate = et.lambda1;
    b.deescalate = et.lambda2;
    b.eta = et.eta;
  } else {
    const auto prior = iboin_hypothesis_prior(strength_of(ins), cfg.targets);
    const auto tb = iboin_boundaries(prior, n, cfg.targets);
    b.escalate = tb.lambda_e;
    b.deescalate = tb.lambda_d;
  }
  return b;
}

bool borrows_at(const TrialState& s, std::size_t j, const EngineConfig& cfg) {
  return is_hybrid(cfg.variant) && at_inserted(s, j) && s.data[j].n >= 1 &&
         borrowing_guard(s, cfg).result == GuardResult::kBorrow;
}

bool eliminated(const TrialState& s, std::size_t k) { return s.tox_eliminated[k] || s.eff_eliminated[k]; }

bool can_receive(const TrialState& s, std::size_t k, const EngineConfig& cfg) {
  return !eliminated(s, k) && s.data[k].n < cfg.per_dose_cap;
}

std::optional<std::size_t> nearest_up(const TrialState& s, std::size_t j, const EngineConfig& cfg) {
  for (std::size_t k = j + 1; k < s.grid.size(); ++k) {
    if (s.tox_eliminated[k]) return std::nullopt;
    if (can_receive(s, k, cfg)) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> nearest_down(const TrialState& s, std::size_t j, const EngineConfig& cfg) {
  for (std::size_t k = j; k-- > 0;) {
    if (can_receive(s, k, cfg)) return k;
  }
  return std::nullopt;
}

bool all_eliminated(const TrialState& s) {
  for (std::size_t k = 0; k < s.grid.size(); ++k) {
    if (!eliminated(s, k)) return false;
  }
  return true;
}

// Observed rate clamped away from 0 and 1 so that binomial likelihoods stay finite.
std::optional<double> clamped_rate(const DoseCounts& c, bool responses) {
  if (c.n < 1) return std::nullopt;
  const double edge = 1.0 / (2.0 * c.n + 2.0);
  const double rate = static_cast<double>(responses ? c.u : c.t) / c.n;
  return std::clamp(rate, edge, 1 - edge);
}

double neighbour_rate(const TrialState& s, std::size_t k, bool responses, double fallback) {
  if (k >= s.grid.size()) return fallback;
  return clamped_rate(s.data[k], responses).value_or(fallback);
}

}  // namespace

BoundariesInForce boundaries_at(const TrialState& state, std::size_t j, const EngineConfig& cfg) {
  if (j >= state.grid.size()) throw std::out_of_range("dose index out of range");
  if (borrows_at(state, j, cfg)) return informative(*state.inserted, state.data[j].n, cfg);
  return non_informative(cfg);
}

GuardCheck borrowing_guard(const TrialState& state, const EngineConfig& cfg) {
  if (!state.inserted) throw std::logic_error("borrowing guard needs an inserted dose");
  const auto& ins = *state.inserted;
  const auto& c = state.data[ins.index];
  if (c.n < 1) throw std::domain_error("borrowing guard needs n >= 1 at the inserted dose");
  GuardCheck g;
  g.p_hat = static_cast<double>(c.t) / c.n;
  g.p_borrow = (c.t + ins.s_tox * ins.r) / (c.n + ins.s_tox);
  g.result = g.p_hat - g.p_borrow > cfg.borrow_threshold ? GuardResult::kDiscard : GuardResult::kBorrow;
  return g;
}

// ---------------------------------------------------------------------------
// Decisions

Decision decide_next_dose(const TrialState& state, const EngineConfig& cfg, RngStream& rng) {
  const std::size_t j = state.current;
  const DoseCounts& c = state.data[j];
  if (c.n < 1) throw std::domain_error("cannot decide at a dose with no treated patients");

  Decision d;
  if (is_hybrid(cfg.variant) && at_inserted(state, j)) d.guard = borrowing_guard(state, cfg);
  d.boundaries = boundaries_at(state, j, cfg);
  const auto& b = d.boundaries;
  const double p_hat = static_cast<double>(c.t) / c.n;
  const double q_hat = static_cast<double>(c.u) / c.n;

  std::optional<std::size_t> target = j;
  if (!b.efficacy) {
    if (p_hat <= b.escalate) {
      d.action = Action::kEscalate;
    } else if (p_hat >= b.deescalate) {
      d.action = Action::kDeescalate;
    } else {
      d.action = Action::kStay;
    }
  } else if (p_hat <= b.escalate && q_hat <= b.eta) {
    d.action = Action::kEscalate;
  } else if (p_hat <= b.deescalate && q_hat > b.eta) {
    d.action = Action::kStay;
  } else if (p_hat >= b.deescalate) {
    d.action = Action::kDeescalate;
  } else {
    d.action = Action::kChoose;
    // Highest observed efficacy among admissible {j-1, j, j+1}; untried doses
    // tie with the best, ties are broken at random.
    std::vector<std::size_t> pool;
    for (std::size_t k = j == 0 ? 0 : j - 1; k <= j + 1 && k < state.grid.size(); ++k) {
      if (can_receive(state, k, cfg)) pool.push_back(k);
    }
    std::vector<std::size_t> best;
    std::optional<std::size_t> leader;
    for (std::size_t k : pool) {
      const auto& ck = state.data[k];
      if (ck.n == 0) continue;
      if (!leader) {
        leader = k;
        continue;
      }
      const auto& cl = state.data[*leader];
      if (static_cast<long>(ck.u) * cl.n > static_cast<long>(cl.u) * ck.n) leader = k;
    }
    for (std::size_t k : pool) {
      const auto& ck = state.data[k];
      if (ck.n == 0) {
        best.push_back(k);
      } else {
        const auto& cl = state.data[*leader];
        if (static_cast<long>(ck.u) * cl.n == static_cast<long>(cl.u) * ck.n) best.push_back(k);
      }
    }
    if (!best.empty()) {
      target = best.size() == 1 ? best.front() : best[rng.uniform_int(0, static_cast<int>(best.size()) - 1)];
    }
  }

  if (d.action == Action::kEscalate) {
    target = nearest_up(state, j, cfg).value_or(j);
  } else if (d.action == Action::kDeescalate) {
    target = nearest_down(state, j, cfg).value_or(j);
  }
  if (*target == j && eliminated(state, j)) {
    target = state.tox_eliminated[j] ? nearest_down(state, j, cfg) : nearest_up(state, j, cfg);
    if (!target && !state.tox_eliminated[j]) target = nearest_down(state, j, cfg);
  }
  d.next = target;
  return d;
}

TrialState apply_elimination(TrialState state, const EngineConfig& cfg) {
  const std::size_t j = state.current;
  const DoseCounts& c = state.data[j];
  if (c.n == 0) return state;
  if (c.n >= cfg.elim_min_n) {
    const double p_over = 1.0 - beta_cdf(1 + c.t, 1 + c.n - c.t, cfg.targets.phi1);
    if (p_over > cfg.elim_tox_threshold) {
      for (std::size_t k = j; k < state.grid.size(); ++k) state.tox_eliminated[k] = true;
    }
  }
  if (is_efficacy_design(cfg.variant)) {
    const double p_under = beta_cdf(1 + c.u, 1 + c.n - c.u, cfg.efficacy.delta1);
    if (p_under > cfg.elim_eff_threshold) state.eff_eliminated[j] = true;
  }
  return state;
}

std::optional<Gap> insertion_trigger(const TrialState& state, const Decision& decision, const EngineConfig& cfg) {
  if (!cfg.insertion_enabled || state.inserted || state.insertion_declined) return std::nullopt;
  if (decision.action != Action::kDeescalate) return std::nullopt;
  const std::size_t g = state.current;
  if (g == 0) return std::nullopt;
  const DoseCounts& lo = state.data[g - 1];
  const DoseCounts& hi = state.data[g];
  if (lo.n < cfg.trigger_min_n || hi.n < cfg.trigger_min_n || lo.n == 0 || hi.n == 0) return std::nullopt;
  if (eliminated(state, g - 1)) return std::nullopt;
  if (is_efficacy_design(cfg.variant)) {
    const double q_lo = static_cast<double>(lo.u) / lo.n;
    const double q_hi = static_cast<double>(hi.u) / hi.n;
    if (!(q_lo < cfg.efficacy.delta1 && q_hi > cfg.efficacy.delta1)) return std::nullopt;
  }
  return Gap{g - 1, g};
}

TrialStatus check_stopping(const TrialState& state, const Decision& decision, const EngineConfig& cfg) {
  if (all_eliminated(state)) return TrialStatus::kStoppedAllEliminated;
  if (!decision.next) return TrialStatus::kStoppedStayCap;
  if (*decision.next == state.current && state.data[state.current].n >= cfg.per_dose_cap) {
    return TrialStatus::kStoppedStayCap;
  }
  if (state.enrolled >= state.n_total) return TrialStatus::kStoppedMaxN;
  return TrialStatus::kActive;
}

// ---------------------------------------------------------------------------
// Transitions

namespace {

void adapt_inserted(TrialState& s, const CohortOutcome& o, const EngineConfig& cfg) {
  auto& ins = *s.inserted;
  const bool et = is_efficacy_design(cfg.variant);
  const IntervalOutcome tox{o.patients, o.dlt};
  const IntervalOutcome eff{o.patients, o.responses};
  const bool mixture = cfg.adaptive == AdaptiveMode::kMixtureBlend || cfg.adaptive == AdaptiveMode::kMixtureMap;

  if (mixture) {
    ins.tox_weights = mixture_posterior(ins.tox_weights, ins.tox_candidates, tox);
    if (et) ins.eff_weights = mixture_posterior(ins.eff_weights, ins.eff_candidates, eff);
  } else {
    ins.tox_weights = hedge_update(ins.tox_weights, ins.tox_candidates, tox);
    if (et) ins.eff_weights = hedge_update(ins.eff_weights, ins.eff_candidates, eff);
  }

  // Refresh the model-based candidates and the ESS from every observation so far.
  const auto bundle = build_skeleton_bundle(s.grid, s.data, ins.index, cfg.skeleton, et);
  ins.s_tox = bundle.adj_T.s;
  if (et) ins.s_eff = bundle.adj_E.s;

  if (mixture) {
    const auto mode = cfg.adaptive == AdaptiveMode::kMixtureMap ? MixtureMode::kMap : MixtureMode::kBlend;
    ins.tox_candidates = CandidateSet::mixture(bundle.r, neighbour_rate(s, ins.index + 1, false, bundle.r),
                                               neighbour_rate(s, ins.index - 1, false, bundle.r));
    ins.r = mixture_skeleton(ins.tox_weights, ins.tox_candidates, mode);
    if (et) {
      ins.eff_candidates = CandidateSet::mixture(*bundle.v, neighbour_rate(s, ins.index + 1, true, *bundle.v),
                                                 neighbour_rate(s, ins.index - 1, true, *bundle.v));
      ins.v = mixture_skeleton(ins.eff_weights, ins.eff_candidates, mode);
    }
  } else {
    const bool ftl = cfg.adaptive == AdaptiveMode::kFtl;
    ins.tox_candidates = CandidateSet::hedge(ins.r0, bundle.r);
    ins.r = ftl ? ftl_select(ins.tox_weights, ins.tox_candidates)
                : combined_skeleton(ins.tox_weights, ins.tox_candidates);
    if (et) {
      ins.eff_candidates = CandidateSet::hedge(*ins.v0, *bundle.v);
      ins.v = ftl ? ftl_select(ins.eff_weights, ins.eff_candidates)
                  : combined_skeleton(ins.eff_weights, ins.eff_candidates);
    }
  }
}

void fill_skeleton_fields(const TrialState& s, CohortRecord& rec) {
  if (!s.inserted) return;
  const auto& ins = *s.inserted;
  rec.skeleton_tox = ins.r;
  rec.skeleton_eff = ins.v;
  rec.s_tox = ins.s_tox;
  if (ins.v) rec.s_eff = ins.s_eff;
  rec.tox_weights = ins.tox_weights.weights;
  rec.eff_weights = ins.eff_weights.weights;
}

}  // namespace

StepResult step(const TrialState& state, const CohortOutcome& outcome, const EngineConfig& cfg) {
  if (state.status != TrialStatus::kActive) {
    throw std::domain_error("trial is not accepting cohorts (status " + std::string(to_string(state.status)) + ")");
  }
  if (outcome.patients < 1 || outcome.patients > cfg.cohort_size) {
    throw std::domain_error("cohort must contain between 1 and cohort_size patients");
  }
  if (outcome.dlt < 0 || outcome.dlt > outcome.patients || outcome.responses < 0 ||
      outcome.responses > outcome.patients) {
    throw std::domain_error("cohort outcome counts must lie between 0 and the cohort size");
  }
  const std::size_t j = state.current;
  if (state.data[j].n + outcome.patients > cfg.per_dose_cap) {
    throw std::domain_error("cohort would exceed the per-dose cap");
  }
  if (state.enrolled + outcome.patients > state.n_total) {
    throw std::domain_error("cohort would exceed the total sample size");
  }

  StepResult out{state, {}};
  TrialState& s = out.state;
  s.pending_gap.reset();
  s.data[j].n += outcome.patients;
  s.data[j].t += outcome.dlt;
  s.data[j].u += outcome.responses;
  s.enrolled += outcome.patients;
  ++s.cohorts;

  const auto before_tox = s.tox_eliminated;
  const auto before_eff = s.eff_eliminated;
  s = apply_elimination(std::move(s), cfg);

  if (is_hybrid(cfg.variant) && at_inserted(s, j) && cfg.adaptive != AdaptiveMode::kNone) {
    adapt_inserted(s, outcome, cfg);
  }

  const Decision decision = decide_next_dose(s, cfg, s.rng);
  if (decision.guard && decision.guard->result == GuardResult::kDiscard) ++s.discard_events;
  const auto trigger = insertion_trigger(s, decision, cfg);
  TrialStatus status = check_stopping(s, decision, cfg);
  if (trigger) {
    s.pending_gap = trigger;
    if (status != TrialStatus::kActive) status = TrialStatus::kAwaitingInsertion;
  }

  CohortRecord& rec = out.record;
  rec.sequence = s.cohorts;
  rec.dose_index = j;
  rec.dose = s.grid.doses[j];
  rec.cohort = outcome;
  rec.counts = s.data[j];
  for (std::size_t k = 0; k < s.grid.size(); ++k) {
    if ((s.tox_eliminated[k] && !before_tox[k]) || (s.eff_eliminated[k] && !before_eff[k])) {
      rec.newly_eliminated.push_back(k);
    }
  }
  rec.boundaries = decision.boundaries;
  rec.guard = decision.guard;
  fill_skeleton_fields(s, rec);
  rec.action = decision.action;
  rec.next_index = decision.next;
  rec.trigger = trigger;

  if (decision.next) s.current = *decision.next;
  s.status = status;
  rec.enrolled = s.enrolled;
  rec.status = status;
  return out;
}

InsertResult insert_dose(const TrialState& state, double d_star, const EngineConfig& cfg, bool force) {
  if (state.inserted) throw std::domain_error("a dose has already been inserted in this trial");
  if (state.status != TrialStatus::kActive && state.status != TrialStatus::kAwaitingInsertion) {
    throw std::domain_error("cannot insert a dose into a stopped trial");
  }
  const auto& doses = state.grid.doses;
  std::optional<std::size_t> lower;
  if (state.pending_gap && !force) {
    const auto [a, b] = *state.pending_gap;
    if (d_star > doses[a] && d_star < doses[b]) lower = a;
  } else if (force) {
    for (std::size_t a = 0; a + 1 < doses.size(); ++a) {
      if (d_star > doses[a] && d_star < doses[a + 1]) lower = a;
    }
  } else {
    throw std::domain_error("no insertion has been triggered");
  }
  if (!lower) throw std::domain_error("inserted dose must lie strictly inside the gap");

  InsertResult out{state, {}};
  TrialState& s = out.state;
  const std::size_t idx = *lower + 1;
  const auto at = static_cast<std::ptrdiff_t>(idx);
  s.grid.doses.insert(s.grid.doses.begin() + at, d_star);
  s.grid.inserted_index = idx;
  s.data.insert(s.data.begin() + at, DoseCounts{});
  s.tox_eliminated.insert(s.tox_eliminated.begin() + at, static_cast<bool>(s.tox_eliminated[*lower]));
  s.eff_eliminated.insert(s.eff_eliminated.begin() + at, false);

  const bool et = is_efficacy_design(cfg.variant);
  InsertedDose ins;
  ins.index = idx;
  ins.dose = d_star;
  if (is_hybrid(cfg.variant)) {
    ins.bundle = build_skeleton_bundle(s.grid, s.data, idx, cfg.skeleton, et);
    ins.r0 = ins.bundle->r;
    ins.s_tox = ins.bundle->adj_T.s;
    if (et) {
      ins.v0 = ins.bundle->v;
      ins.s_eff = ins.bundle->adj_E.s;
    }
  } else if (et) {
    ins.v0 = 0.5;
  }
  ins.r = ins.r0;
  ins.v = ins.v0;

  const bool mixture = cfg.adaptive == AdaptiveMode::kMixtureBlend || cfg.adaptive == AdaptiveMode::kMixtureMap;
  if (is_hybrid(cfg.variant) && mixture) {
    const auto mode = cfg.adaptive == AdaptiveMode::kMixtureMap ? MixtureMode::kMap : MixtureMode::kBlend;
    ins.tox_weights = WeightState::uniform(3);
    ins.tox_candidates =
        CandidateSet::mixture(ins.r0, neighbour_rate(s, idx + 1, false, ins.r0), neighbour_rate(s, idx - 1, false, ins.r0));
    ins.r = mixture_skeleton(ins.tox_weights, ins.tox_candidates, mode);
    if (et) {
      ins.eff_weights = WeightState::uniform(3);
      ins.eff_candidates = CandidateSet::mixture(*ins.v0, neighbour_rate(s, idx + 1, true, *ins.v0),
                                                 neighbour_rate(s, idx - 1, true, *ins.v0));
      ins.v = mixture_skeleton(ins.eff_weights, ins.eff_candidates, mode);
    }
  } else if (is_hybrid(cfg.variant) && cfg.adaptive != AdaptiveMode::kNone) {
    ins.tox_weights = WeightState::uniform(2);
    ins.tox_weights.weights = {cfg.hedge_initial_weight, 1 - cfg.hedge_initial_weight};
    ins.tox_candidates = CandidateSet::hedge(ins.r0, ins.r0);
    if (et) {
      ins.eff_weights = ins.tox_weights;
      ins.eff_candidates = CandidateSet::hedge(*ins.v0, *ins.v0);
    }
  }
  s.inserted = std::move(ins);
  s.pending_gap.reset();
  s.current = idx;
  s.n_total = cfg.n_after_insert;
  s.status = s.enrolled >= s.n_total ? TrialStatus::kStoppedMaxN : TrialStatus::kActive;

  InsertionRecord& rec = out.record;
  rec.sequence = s.cohorts;
  rec.index = idx;
  rec.dose = d_star;
  rec.forced = force;
  rec.grid = s.grid.doses;
  rec.bundle = s.inserted->bundle;
  if (is_hybrid(cfg.variant)) {
    rec.skeleton_tox = s.inserted->r;
    rec.skeleton_eff = s.inserted->v;
  }
  rec.s_tox = s.inserted->s_tox;
  rec.s_eff = s.inserted->s_eff;
  rec.n_total = s.n_total;
  rec.status = s.status;
  return out;
}

TrialState decline_insertion(TrialState state) {
  if (!state.pending_gap) throw std::domain_error("no insertion is pending");
  state.pending_gap.reset();
  state.insertion_declined = true;
  if (state.status == TrialStatus::kAwaitingInsertion) {
    // Awaiting only replaces a terminal status; without insertion the trial ends.
    state.status = state.enrolled >= state.n_total ? TrialStatus::kStoppedMaxN : TrialStatus::kStoppedStayCap;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Selection

std::optional<std::size_t> select_mtd_from_estimates(const std::vector<double>& estimates, double phi1) {
  constexpr double kTie = 1e-12;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const double e = estimates[k];
    if (std::isnan(e)) continue;
    if (!best) {
      best = k;
      continue;
    }
    const double d_new = std::abs(e - phi1);
    const double d_best = std::abs(estimates[*best] - phi1);
    if (d_new < d_best - kTie) {
      best = k;
    } else if (d_new <= d_best + kTie && e < phi1 && estimates[*best] < phi1) {
      best = k;
    }
  }
  return best;
}

namespace {

std::vector<double> isotonic_estimates(const TrialState& state, const EngineConfig& cfg) {
  const std::size_t K = state.grid.size();
  std::vector<double> out(K, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> idx;
  std::vector<double> raw;
  std::vector<double> w;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = state.data[k];
    if (c.n == 0 || state.tox_eliminated[k]) continue;
    idx.push_back(k);
    if (borrows_at(state, k, cfg) && state.inserted->s_tox > 0) {
      const auto& ins = *state.inserted;
      raw.push_back((c.t + ins.s_tox * ins.r) / (c.n + ins.s_tox));
      w.push_back(c.n + ins.s_tox);
    } else {
      raw.push_back((c.t + 0.05) / (c.n + 0.1));
      w.push_back(c.n);
    }
  }
  const auto fitted = isotonic_increasing(raw, w);
  for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = fitted[i];
  return out;
}

}  // namespace

Selection select_mtd(const TrialState& state, const EngineConfig& cfg) {
  Selection sel;
  sel.estimates = isotonic_estimates(state, cfg);
  if (state.tox_eliminated.empty() || state.tox_eliminated[0]) return sel;
  sel.dose = select_mtd_from_estimates(sel.estimates, cfg.targets.phi1);
  return sel;
}

Selection select_obd(const TrialState& state, const EngineConfig& cfg) {
  Selection sel;
  sel.estimates = isotonic_estimates(state, cfg);
  const double limit = cfg.targets.phi1 + 0.1 * (cfg.targets.phi3 - cfg.targets.phi1);
  for (std::size_t k = 0; k < state.grid.size(); ++k) {
    if (std::isnan(sel.estimates[k]) || state.eff_eliminated[k] || sel.estimates[k] > limit) continue;
    const auto& c = state.data[k];
    if (!sel.dose) {
      sel.dose = k;
      continue;
    }
    const auto& b = state.data[*sel.dose];
    if (static_cast<long>(c.u) * b.n > static_cast<long>(b.u) * c.n) sel.dose = k;
  }
  return sel;
}

}  // namespace doseins
