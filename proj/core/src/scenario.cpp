#include "doseins/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "doseins/stats.hpp"

namespace doseins {

namespace {

constexpr double kTie = 1e-12;

constexpr std::array<double, 5> kFixedDoses{300, 900, 1500, 2100, 2400};
constexpr std::array<double, 3> kInsertedRow{0.20, 0.30, 0.50};

std::vector<double> fixed_row(int row) {
  return {0.05, 0.10, 0.15, kInsertedRow.at(static_cast<std::size_t>(row - 1)), 0.60};
}

double quantile_safe(double p) { return normal_quantile(std::clamp(p, 1e-12, 1 - 1e-12)); }

}  // namespace

std::optional<std::size_t> true_mtd(const std::vector<double>& p, double phi1) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!best || std::abs(p[k] - phi1) <= std::abs(p[*best] - phi1) + kTie) best = k;
  }
  return best;
}

std::optional<std::size_t> true_obd(const std::vector<double>& p, const std::vector<double>& q, double phi1) {
  if (p.size() != q.size()) throw std::invalid_argument("p and q must have the same length");
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > phi1 + kTie) continue;
    if (!best || q[k] > q[*best] + kTie) best = k;
  }
  return best;
}

std::vector<FixedScenario> fixed_scenarios(double phi1) {
  std::vector<FixedScenario> out;
  for (int t = 1; t <= 3; ++t) {
    for (int e = 1; e <= 3; ++e) {
      FixedScenario s;
      s.tox_row = t;
      s.eff_row = e;
      s.truth.label = "T" + std::to_string(t) + "E" + std::to_string(e);
      s.truth.doses.assign(kFixedDoses.begin(), kFixedDoses.end());
      s.truth.p = fixed_row(t);
      s.truth.q = fixed_row(e);
      s.truth.inserted_index = 3;
      s.truth.true_mtd = true_mtd(s.truth.p, phi1);
      s.truth.true_obd = true_obd(s.truth.p, s.truth.q, phi1);
      s.trial_grid.doses = {300, 900, 1500, 2400};
      s.trial_grid.d_ref = 2400;
      s.history = {{3, 0, 0}, {3, 0, 0}, {6, 1, 0}, {6, 3, 3}};
      s.d_star = 2100;
      out.push_back(std::move(s));
    }
  }
  return out;
}

FixedScenario fixed_scenario(const std::string& label, double phi1) {
  std::string key = label;
  if (key.size() == 2) key += "E1";
  for (auto& s : fixed_scenarios(phi1)) {
    if (s.truth.label == key) return s;
  }
  throw std::invalid_argument("unknown fixed scenario: " + label);
}

RandomGenParams RandomGenParams::for_target(double phi) {
  RandomGenParams p;
  p.phi = phi;
  p.mu1 = phi - 0.5;
  p.mu2 = phi + 0.5;
  return p;
}

void RandomGenParams::validate() const {
  if (!(phi > 0 && phi < 0.5)) throw std::domain_error("random scenarios need 0 < phi < 0.5");
  for (double s : {sigma0, sigma_star, sigma1, sigma2}) {
    if (!(s >= 0)) throw std::domain_error("standard deviations must be >= 0");
  }
  if (!(delta1 > 0 && delta1 <= q_max && q_max <= 1)) throw std::domain_error("need 0 < delta1 <= q_max <= 1");
  if (doses.size() != 5) throw std::domain_error("random scenarios use five planned positions");
  for (std::size_t k = 1; k < doses.size(); ++k) {
    if (!(doses[k] > doses[k - 1])) throw std::domain_error("planned doses must increase");
  }
}

RandomToxicity random_toxicity(RngStream& rng, const RandomGenParams& params) {
  params.validate();
  constexpr std::size_t J = 5;
  RandomToxicity out;
  out.pivot = static_cast<std::size_t>(rng.uniform_int(1, 3));
  const std::size_t j = out.pivot;
  const double z_phi = normal_quantile(params.phi);
  const double eps_j = rng.normal(z_phi, params.sigma0);
  const double eps_lo = rng.normal(params.mu1, params.sigma1);
  const double eps_hi = rng.normal(params.mu2, params.sigma2);
  const double z_mirror = quantile_safe(2 * params.phi - normal_cdf(eps_j));

  out.p.assign(J, 0.0);
  out.p[j] = normal_cdf(eps_j);
  out.p[j - 1] = normal_cdf(eps_j - (eps_j - z_mirror) * (eps_j > z_phi ? 1.0 : 0.0) - eps_lo * eps_lo);
  out.p[j + 1] = normal_cdf(eps_j + (z_mirror - eps_j) * (eps_j < z_phi ? 1.0 : 0.0) + eps_hi * eps_hi);
  for (std::size_t k = j - 1; k-- > 0;) {
    const double e = rng.normal(params.mu1, params.sigma1);
    out.p[k] = std::min(out.p[k + 1], normal_cdf(quantile_safe(out.p[k + 1]) - e * e));
  }
  for (std::size_t k = j + 2; k < J; ++k) {
    const double e = rng.normal(params.mu2, params.sigma2);
    out.p[k] = std::max(out.p[k - 1], normal_cdf(quantile_safe(out.p[k - 1]) + e * e));
  }
  return out;
}

double inserted_dose_truth(RngStream& rng, double p_low, double p_high, double sigma_star, InsertedTruthMode mode) {
  if (!(p_low <= p_high)) throw std::domain_error("inserted-dose truth needs p_low <= p_high");
  const double mean = mode == InsertedTruthMode::kVerbatim
                          ? (p_high - p_low) / 2
                          : (quantile_safe(p_low) + quantile_safe(p_high)) / 2;
  return normal_cdf(rng.normal(mean, sigma_star));
}

std::vector<double> random_efficacy(RngStream& rng, const RandomGenParams& params, std::size_t positions) {
  params.validate();
  if (positions == 0) throw std::domain_error("need at least one position");
  const int last = static_cast<int>(positions) - 1;
  std::vector<double> q(positions, 0.0);
  const auto anchor = static_cast<std::size_t>(rng.uniform_int(0, last));
  q[anchor] = rng.uniform(params.delta1, params.q_max);

  if (params.shape == EfficacyShape::kMonotone) {
    for (std::size_t k = anchor; k-- > 0;) q[k] = rng.uniform(0, q[k + 1]);
    for (std::size_t k = anchor + 1; k < positions; ++k) q[k] = rng.uniform(q[k - 1], params.q_max);
    return q;
  }

  const auto peak = static_cast<std::size_t>(rng.uniform_int(0, last));
  if (peak != anchor) {
    q[peak] = rng.uniform(q[anchor], params.q_max);
    const std::size_t lo = std::min(anchor, peak);
    const std::size_t hi = std::max(anchor, peak);
    std::vector<double> bridge;
    for (std::size_t k = lo + 1; k < hi; ++k) bridge.push_back(rng.uniform(q[anchor], q[peak]));
    // Rising from the anchor towards the peak.
    std::sort(bridge.begin(), bridge.end());
    if (peak < anchor) std::reverse(bridge.begin(), bridge.end());
    for (std::size_t k = lo + 1; k < hi; ++k) q[k] = bridge[k - lo - 1];
  }
  const std::size_t lo = std::min(anchor, peak);
  const std::size_t hi = std::max(anchor, peak);
  for (std::size_t k = lo; k-- > 0;) q[k] = rng.uniform(0, q[k + 1]);
  for (std::size_t k = hi + 1; k < positions; ++k) q[k] = rng.uniform(0, q[k - 1]);
  return q;
}

DoseGrid RandomScenario::trial_grid() const {
  DoseGrid g;
  for (std::size_t k = 0; k < doses.size(); ++k) {
    if (k != toxicity.pivot) g.doses.push_back(doses[k]);
  }
  g.d_ref = g.doses.back();
  return g;
}

namespace {

std::vector<double> without(const std::vector<double>& v, std::size_t skip) {
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k != skip) out.push_back(v[k]);
  }
  return out;
}

}  // namespace

std::vector<double> RandomScenario::trial_p() const { return without(toxicity.p, toxicity.pivot); }
std::vector<double> RandomScenario::trial_q() const { return without(q, toxicity.pivot); }

RandomScenario random_scenario(RngStream& rng, const RandomGenParams& params) {
  RandomScenario s;
  s.toxicity = random_toxicity(rng, params);
  s.q = random_efficacy(rng, params, params.doses.size());
  s.doses = params.doses;
  return s;
}

std::string to_string(EfficacyShape s) { return s == EfficacyShape::kMonotone ? "monotone" : "unimodal"; }
std::string to_string(InsertedTruthMode m) { return m == InsertedTruthMode::kVerbatim ? "verbatim" : "z-midpoint"; }

EfficacyShape parse_efficacy_shape(const std::string& s) {
  if (s == "monotone") return EfficacyShape::kMonotone;
  if (s == "unimodal") return EfficacyShape::kUnimodal;
  throw std::invalid_argument("unknown efficacy shape: " + s);
}

InsertedTruthMode parse_inserted_truth_mode(const std::string& s) {
  if (s == "verbatim") return InsertedTruthMode::kVerbatim;
  if (s == "z-midpoint") return InsertedTruthMode::kZMidpoint;
  throw std::invalid_argument("unknown inserted-dose truth mode: " + s);
}

}  // namespace doseins
