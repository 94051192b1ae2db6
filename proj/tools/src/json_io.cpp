#include "doseins_tools/json_io.hpp"

#include <cmath>

namespace doseins {

void require_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
  }
}

namespace {

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }
json optional_int(const std::optional<int>& x) { return x ? json(*x) : json(nullptr); }
json optional_index(const std::optional<std::size_t>& x) { return x ? json(*x) : json(nullptr); }

json finite_or_null(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

json gap_json(const std::optional<Gap>& g) { return g ? json::array({g->first, g->second}) : json(nullptr); }

double number(const json& j, std::string_view key, std::string_view context) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number()) throw ConfigError(std::string(context) + "." + std::string(key) + ": expected a number");
  return v.get<double>();
}

int integer(const json& j, std::string_view key, std::string_view context) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number_integer()) throw ConfigError(std::string(context) + "." + std::string(key) + ": expected an integer");
  return v.get<int>();
}

template <typename T>
void read_if(const json& j, std::string_view key, T& target, std::string_view context) {
  if (!j.contains(std::string(key))) return;
  if constexpr (std::is_same_v<T, int>) {
    target = integer(j, key, context);
  } else if constexpr (std::is_same_v<T, bool>) {
    const auto& v = j.at(std::string(key));
    if (!v.is_boolean()) throw ConfigError(std::string(context) + "." + std::string(key) + ": expected a boolean");
    target = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    const auto& v = j.at(std::string(key));
    if (!v.is_number_unsigned()) {
      throw ConfigError(std::string(context) + "." + std::string(key) + ": expected a non-negative integer");
    }
    target = v.get<std::uint64_t>();
  } else {
    target = number(j, key, context);
  }
}

}  // namespace

void to_json(json& j, const DoseCounts& c) { j = json{{"n", c.n}, {"t", c.t}, {"u", c.u}}; }

void from_json(const json& j, DoseCounts& c) {
  require_keys(j, {"n", "t", "u"}, "counts");
  c.n = integer(j, "n", "counts");
  c.t = j.contains("t") ? integer(j, "t", "counts") : 0;
  c.u = j.contains("u") ? integer(j, "u", "counts") : 0;
}

void to_json(json& j, const BoundariesInForce& b) {
  j = json{{"efficacy", b.efficacy}, {"informative", b.informative}, {"escalate", b.escalate},
           {"deescalate", b.deescalate}};
  j["eta"] = b.efficacy ? json(b.eta) : json(nullptr);
}

void to_json(json& j, const GuardCheck& g) {
  j = json{{"result", to_string(g.result)}, {"p_hat", g.p_hat}, {"p_borrow", g.p_borrow}};
}

void to_json(json& j, const SkeletonBundle& b) {
  j = json{{"r", b.r},         {"v", optional_number(b.v)}, {"mu_T", b.mu_T},       {"var_T", b.var_T},
           {"ess_T", b.ess_T}, {"s_T", b.adj_T.s},          {"cap", b.cap},          {"provenance", b.provenance}};
  if (b.v) {
    j["mu_E"] = b.mu_E;
    j["var_E"] = b.var_E;
    j["ess_E"] = b.ess_E;
    j["s_E"] = b.adj_E.s;
  }
  j["fp_powers"] = b.fp_powers ? json::array({b.fp_powers->first, b.fp_powers->second}) : json(nullptr);
}

void to_json(json& j, const CohortOutcome& o) {
  j = json{{"patients", o.patients}, {"dlt", o.dlt}, {"responses", o.responses}};
}

void to_json(json& j, const CohortRecord& r) {
  j = json{{"kind", "cohort"},
           {"sequence", r.sequence},
           {"dose_index", r.dose_index},
           {"dose", r.dose},
           {"cohort", r.cohort},
           {"counts", r.counts},
           {"newly_eliminated", r.newly_eliminated},
           {"boundaries", r.boundaries},
           {"guard", r.guard ? json(*r.guard) : json(nullptr)},
           {"skeleton_tox", optional_number(r.skeleton_tox)},
           {"skeleton_eff", optional_number(r.skeleton_eff)},
           {"s_tox", optional_int(r.s_tox)},
           {"s_eff", optional_int(r.s_eff)},
           {"tox_weights", r.tox_weights},
           {"eff_weights", r.eff_weights},
           {"action", to_string(r.action)},
           {"next_index", optional_index(r.next_index)},
           {"trigger", gap_json(r.trigger)},
           {"enrolled", r.enrolled},
           {"status", to_string(r.status)}};
}

void to_json(json& j, const InsertionRecord& r) {
  j = json{{"kind", "insertion"},
           {"sequence", r.sequence},
           {"index", r.index},
           {"dose", r.dose},
           {"forced", r.forced},
           {"grid", r.grid},
           {"bundle", r.bundle ? json(*r.bundle) : json(nullptr)},
           {"skeleton_tox", optional_number(r.skeleton_tox)},
           {"skeleton_eff", optional_number(r.skeleton_eff)},
           {"s_tox", r.s_tox},
           {"s_eff", r.s_eff},
           {"n_total", r.n_total},
           {"status", to_string(r.status)}};
}

void to_json(json& j, const WeightState& w) {
  j = json{{"weights", w.weights},
           {"cumulative_losses", w.cumulative_losses},
           {"updates", w.updates},
           {"degenerate_updates", w.degenerate_updates}};
}

void to_json(json& j, const Selection& s) {
  j = json{{"dose_index", optional_index(s.dose)}, {"estimates", finite_or_null(s.estimates)}};
}

void to_json(json& j, const ScenarioTruth& s) {
  j = json{{"label", s.label},
           {"doses", s.doses},
           {"p", s.p},
           {"q", s.q},
           {"inserted_index", optional_index(s.inserted_index)},
           {"true_mtd", optional_index(s.true_mtd)},
           {"true_obd", optional_index(s.true_obd)}};
}

void to_json(json& j, const FixedScenario& s) {
  j = json{{"truth", s.truth},
           {"trial_doses", s.trial_grid.doses},
           {"d_ref", s.trial_grid.d_ref},
           {"history", s.history},
           {"d_star", s.d_star}};
}

void to_json(json& j, const RandomScenario& s) {
  j = json{{"doses", s.doses},
           {"pivot", s.toxicity.pivot},
           {"p", s.toxicity.p},
           {"q", s.q},
           {"trial_doses", s.trial_grid().doses},
           {"trial_p", s.trial_p()},
           {"trial_q", s.trial_q()}};
}

void to_json(json& j, const BatchMetrics& m) {
  j = json{{"scenario", m.scenario},
           {"variant", to_string(m.variant)},
           {"adaptive_mode", to_string(m.adaptive)},
           {"c", is_hybrid(m.variant) ? json(m.c) : json(nullptr)},
           {"replicates", m.replicates},
           {"pct_correct_mtd", m.pct_correct_mtd},
           {"pct_correct_obd", optional_number(m.pct_correct_obd)},
           {"pct_over_mtd", m.pct_over_mtd},
           {"pct_overly_toxic", m.pct_overly_toxic},
           {"excluded", m.excluded},
           {"inserted", m.inserted},
           {"discard_events", m.discard_events},
           {"avg_allocation", m.avg_allocation},
           {"pct_selected", m.pct_selected},
           {"pct_no_selection", m.pct_no_selection}};
}

json state_to_json(const TrialState& s, const EngineConfig& cfg) {
  json doses = json::array();
  for (std::size_t k = 0; k < s.grid.size(); ++k) {
    doses.push_back({{"index", k},
                     {"dose", s.grid.doses[k]},
                     {"counts", s.data[k]},
                     {"tox_eliminated", static_cast<bool>(s.tox_eliminated[k])},
                     {"eff_eliminated", static_cast<bool>(s.eff_eliminated[k])},
                     {"capped", s.data[k].n >= cfg.per_dose_cap},
                     {"inserted", s.inserted && s.inserted->index == k}});
  }
  json j{{"variant", to_string(cfg.variant)},
         {"adaptive_mode", to_string(cfg.adaptive)},
         {"c", cfg.borrow_threshold},
         {"doses", doses},
         {"d_ref", s.grid.d_ref},
         {"current", s.current},
         {"enrolled", s.enrolled},
         {"n_total", s.n_total},
         {"status", to_string(s.status)},
         {"cohorts", s.cohorts},
         {"discard_events", s.discard_events},
         {"pending_gap", gap_json(s.pending_gap)},
         {"insertion_declined", s.insertion_declined},
         {"boundaries", boundaries_at(s, s.current, cfg)},
         {"rng", {{"key", s.rng.key()}, {"counter", s.rng.counter()}}}};
  if (s.inserted) {
    const auto& ins = *s.inserted;
    j["inserted"] = {{"index", ins.index},
                     {"dose", ins.dose},
                     {"bundle", ins.bundle ? json(*ins.bundle) : json(nullptr)},
                     {"r0", ins.r0},
                     {"r", ins.r},
                     {"v0", optional_number(ins.v0)},
                     {"v", optional_number(ins.v)},
                     {"s_tox", ins.s_tox},
                     {"s_eff", ins.s_eff},
                     {"tox_weights", ins.tox_weights},
                     {"eff_weights", ins.eff_weights}};
  } else {
    j["inserted"] = nullptr;
  }
  return j;
}

CohortOutcome cohort_outcome_from_json(const json& j, int default_patients) {
  CohortOutcome o;
  o.patients = default_patients;
  read_if(j, "patients", o.patients, "cohort");
  if (!j.contains("dlt")) throw ConfigError("cohort.dlt: required");
  o.dlt = integer(j, "dlt", "cohort");
  read_if(j, "responses", o.responses, "cohort");
  return o;
}

EngineConfig engine_config_from_json(const json& j, Variant variant, AdaptiveMode mode, double c) {
  require_keys(j,
               {"phi1", "phi2", "phi3", "delta1", "delta2", "cohort_size", "n_initial", "n_after_insert",
                "per_dose_cap", "elim_tox_threshold", "elim_eff_threshold", "elim_min_n", "trigger_min_n",
                "hedge_initial_weight", "insertion_enabled", "gamma1", "gamma2", "blrm", "fp"},
               "engine");
  double phi1 = 0.30;
  read_if(j, "phi1", phi1, "engine");
  EngineConfig cfg = EngineConfig::defaults(variant, phi1);
  cfg.adaptive = mode;
  cfg.borrow_threshold = c;
  read_if(j, "phi2", cfg.targets.phi2, "engine");
  read_if(j, "phi3", cfg.targets.phi3, "engine");
  read_if(j, "delta1", cfg.efficacy.delta1, "engine");
  read_if(j, "delta2", cfg.efficacy.delta2, "engine");
  read_if(j, "cohort_size", cfg.cohort_size, "engine");
  read_if(j, "n_initial", cfg.n_initial, "engine");
  read_if(j, "n_after_insert", cfg.n_after_insert, "engine");
  read_if(j, "per_dose_cap", cfg.per_dose_cap, "engine");
  read_if(j, "elim_tox_threshold", cfg.elim_tox_threshold, "engine");
  read_if(j, "elim_eff_threshold", cfg.elim_eff_threshold, "engine");
  read_if(j, "elim_min_n", cfg.elim_min_n, "engine");
  read_if(j, "trigger_min_n", cfg.trigger_min_n, "engine");
  read_if(j, "hedge_initial_weight", cfg.hedge_initial_weight, "engine");
  read_if(j, "insertion_enabled", cfg.insertion_enabled, "engine");
  read_if(j, "gamma1", cfg.skeleton.gamma1, "engine");
  read_if(j, "gamma2", cfg.skeleton.gamma2, "engine");
  if (j.contains("blrm")) {
    const auto& b = j.at("blrm");
    require_keys(b, {"mu_alpha", "sigma_alpha", "mu_beta", "sigma_beta", "grid_points", "span_sd"}, "engine.blrm");
    auto& p = cfg.skeleton.blrm;
    read_if(b, "mu_alpha", p.mu_alpha, "engine.blrm");
    read_if(b, "sigma_alpha", p.sigma_alpha, "engine.blrm");
    read_if(b, "mu_beta", p.mu_beta, "engine.blrm");
    read_if(b, "sigma_beta", p.sigma_beta, "engine.blrm");
    read_if(b, "grid_points", p.grid_points, "engine.blrm");
    read_if(b, "span_sd", p.span_sd, "engine.blrm");
  }
  if (j.contains("fp")) {
    const auto& f = j.at("fp");
    require_keys(f, {"coef_sd", "samples", "seed"}, "engine.fp");
    read_if(f, "coef_sd", cfg.skeleton.fp.coef_sd, "engine.fp");
    read_if(f, "samples", cfg.skeleton.fp.samples, "engine.fp");
    read_if(f, "seed", cfg.skeleton.fp.seed, "engine.fp");
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("engine: ") + e.what());
  }
  return cfg;
}

json engine_config_to_json(const EngineConfig& cfg) {
  const auto& b = cfg.skeleton.blrm;
  const auto& f = cfg.skeleton.fp;
  return json{{"phi1", cfg.targets.phi1},
              {"phi2", cfg.targets.phi2},
              {"phi3", cfg.targets.phi3},
              {"delta1", cfg.efficacy.delta1},
              {"delta2", cfg.efficacy.delta2},
              {"cohort_size", cfg.cohort_size},
              {"n_initial", cfg.n_initial},
              {"n_after_insert", cfg.n_after_insert},
              {"per_dose_cap", cfg.per_dose_cap},
              {"elim_tox_threshold", cfg.elim_tox_threshold},
              {"elim_eff_threshold", cfg.elim_eff_threshold},
              {"elim_min_n", cfg.elim_min_n},
              {"trigger_min_n", cfg.trigger_min_n},
              {"hedge_initial_weight", cfg.hedge_initial_weight},
              {"insertion_enabled", cfg.insertion_enabled},
              {"gamma1", cfg.skeleton.gamma1},
              {"gamma2", cfg.skeleton.gamma2},
              {"blrm",
               {{"mu_alpha", b.mu_alpha},
                {"sigma_alpha", b.sigma_alpha},
                {"mu_beta", b.mu_beta},
                {"sigma_beta", b.sigma_beta},
                {"grid_points", b.grid_points},
                {"span_sd", b.span_sd}}},
              {"fp", {{"coef_sd", f.coef_sd}, {"samples", f.samples}, {"seed", f.seed}}}};
}

RandomGenParams random_params_from_json(const json& j, double phi1, EfficacyShape shape) {
  require_keys(j,
               {"sigma0", "sigma_star", "mu1", "mu2", "sigma1", "sigma2", "delta1", "q_max", "inserted_mode",
                "doses"},
               "random");
  RandomGenParams p = RandomGenParams::for_target(phi1);
  p.shape = shape;
  read_if(j, "sigma0", p.sigma0, "random");
  read_if(j, "sigma_star", p.sigma_star, "random");
  read_if(j, "mu1", p.mu1, "random");
  read_if(j, "mu2", p.mu2, "random");
  read_if(j, "sigma1", p.sigma1, "random");
  read_if(j, "sigma2", p.sigma2, "random");
  read_if(j, "delta1", p.delta1, "random");
  read_if(j, "q_max", p.q_max, "random");
  if (j.contains("inserted_mode")) {
    if (!j.at("inserted_mode").is_string()) throw ConfigError("random.inserted_mode: expected a string");
    try {
      p.inserted_mode = parse_inserted_truth_mode(j.at("inserted_mode").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("random.inserted_mode: ") + e.what());
    }
  }
  if (j.contains("doses")) {
    const auto& d = j.at("doses");
    if (!d.is_array()) throw ConfigError("random.doses: expected an array");
    p.doses.clear();
    for (const auto& x : d) {
      if (!x.is_number()) throw ConfigError("random.doses: expected numbers");
      p.doses.push_back(x.get<double>());
    }
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("random: ") + e.what());
  }
  return p;
}

json random_params_to_json(const RandomGenParams& p) {
  return json{{"phi", p.phi},         {"sigma0", p.sigma0}, {"sigma_star", p.sigma_star},
              {"mu1", p.mu1},         {"mu2", p.mu2},       {"sigma1", p.sigma1},
              {"sigma2", p.sigma2},   {"delta1", p.delta1}, {"q_max", p.q_max},
              {"shape", to_string(p.shape)}, {"inserted_mode", to_string(p.inserted_mode)}, {"doses", p.doses}};
}

}  // namespace doseins
