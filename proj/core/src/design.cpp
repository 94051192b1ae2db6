#include "doseins/design.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doseins/stats.hpp"

namespace doseins {

namespace {

bool open_unit(double x) { return x > 0.0 && x < 1.0; }

// log-odds denominators and the n-free numerators shared by every design
double esc_numerator(const ToxicityTargets& t) { return std::log((1 - t.phi2) / (1 - t.phi1)); }
double esc_denominator(const ToxicityTargets& t) {
  return std::log(t.phi1 * (1 - t.phi2) / (t.phi2 * (1 - t.phi1)));
}
double deesc_numerator(const ToxicityTargets& t) { return std::log((1 - t.phi1) / (1 - t.phi3)); }
double deesc_denominator(const ToxicityTargets& t) {
  return std::log(t.phi3 * (1 - t.phi1) / (t.phi1 * (1 - t.phi3)));
}

// sum_x w(x, theta_k) Binom(x; s, r) for every hypothesis value theta_k
template <std::size_t K>
std::array<double, K> binomial_mixture_prior(int s, double r, const std::array<double, K>& theta) {
  std::array<double, K> out{};
  for (int x = 0; x <= s; ++x) {
    std::array<double, K> logw{};
    double max_logw = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      logw[k] = x * std::log(theta[k]) + (s - x) * std::log1p(-theta[k]);
      max_logw = std::max(max_logw, logw[k]);
    }
    double norm = 0;
    for (std::size_t k = 0; k < K; ++k) norm += std::exp(logw[k] - max_logw);
    const double pmf = binomial_pmf(x, s, r);
    for (std::size_t k = 0; k < K; ++k) out[k] += std::exp(logw[k] - max_logw) / norm * pmf;
  }
  return out;
}

void check_n(int n) {
  if (n < 1) throw std::domain_error("informative boundaries need n >= 1 treated patients");
}

}  // namespace

void ToxicityTargets::validate() const {
  if (!(open_unit(phi1) && open_unit(phi2) && open_unit(phi3) && phi2 < phi1 && phi1 < phi3)) {
    throw std::domain_error("toxicity targets must satisfy 0 < phi2 < phi1 < phi3 < 1");
  }
}

void EfficacyTargets::validate() const {
  if (!(open_unit(delta1) && open_unit(delta2) && delta2 < delta1)) {
    throw std::domain_error("efficacy targets must satisfy 0 < delta2 < delta1 < 1");
  }
}

double JointPrior::sum() const {
  double total = 0;
  for (const auto& row : pi) total += row[0] + row[1];
  return total;
}

ToxicityBoundaries boin_boundaries(const ToxicityTargets& targets) {
  targets.validate();
  return {esc_numerator(targets) / esc_denominator(targets),
          deesc_numerator(targets) / deesc_denominator(targets)};
}

ToxicityPrior iboin_hypothesis_prior(const PriorStrength& strength, const ToxicityTargets& targets) {
  targets.validate();
  if (strength.s < 0) throw std::domain_error("prior effective sample size must be >= 0");
  if (!open_unit(strength.r)) throw std::domain_error("toxicity skeleton must lie in (0, 1)");
  return {binomial_mixture_prior<3>(strength.s, strength.r, {targets.phi1, targets.phi2, targets.phi3})};
}

ToxicityBoundaries iboin_boundaries(const ToxicityPrior& prior, int n, const ToxicityTargets& targets) {
  targets.validate();
  check_n(n);
  const auto& pi = prior.pi;
  const double inv_n = 1.0 / n;
  return {(esc_numerator(targets) + inv_n * std::log(pi[1] / pi[0])) / esc_denominator(targets),
          (deesc_numerator(targets) + inv_n * std::log(pi[0] / pi[2])) / deesc_denominator(targets)};
}

JointPrior iboinet_hypothesis_prior(const PriorStrength& strength, const ToxicityTargets& targets,
                                    const EfficacyTargets& eff) {
  targets.validate();
  eff.validate();
  if (!strength.v) throw std::domain_error("efficacy skeleton v is required for BOIN-ET priors");
  if (!open_unit(*strength.v)) throw std::domain_error("efficacy skeleton must lie in (0, 1)");
  const int s_eff = strength.s_efficacy.value_or(strength.s);
  if (strength.s < 0 || s_eff < 0) throw std::domain_error("prior effective sample size must be >= 0");
  if (!open_unit(strength.r)) throw std::domain_error("toxicity skeleton must lie in (0, 1)");

  // The double sum over (x, y) factorizes into a toxicity part and an efficacy part.
  const auto tox = binomial_mixture_prior<3>(strength.s, strength.r, {targets.phi1, targets.phi2, targets.phi3});
  const auto effp = binomial_mixture_prior<2>(s_eff, *strength.v, {eff.delta1, eff.delta2});
  JointPrior out;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t m = 0; m < 2; ++m) out.pi[k][m] = tox[k] * effp[m];
  }
  return out;
}

EtBoundaries iboinet_boundaries(const JointPrior& prior, int n, const ToxicityTargets& targets,
                                const EfficacyTargets& eff) {
  targets.validate();
  eff.validate();
  check_n(n);
  const auto& p = prior.pi;
  const double inv_n = 1.0 / n;
  const double tox1 = p[0][0] + p[0][1];
  const double tox2 = p[1][0] + p[1][1];
  const double tox3 = p[2][0] + p[2][1];
  const double eff1 = p[0][0] + p[1][0] + p[2][0];
  const double eff2 = p[0][1] + p[1][1] + p[2][1];
  const double d1 = eff.delta1;
  const double d2 = eff.delta2;
  return {
      (esc_numerator(targets) + inv_n * std::log(tox2 / tox1)) / esc_denominator(targets),
      (deesc_numerator(targets) + inv_n * std::log(tox1 / tox3)) / deesc_denominator(targets),
      (std::log((1 - d2) / (1 - d1)) + inv_n * std::log(eff2 / eff1)) /
          std::log(d1 * (1 - d2) / (d2 * (1 - d1))),
  };
}

EtBoundaries boinet_boundaries(const ToxicityTargets& targets, const EfficacyTargets& eff) {
  return iboinet_boundaries(JointPrior::uniform(), 1, targets, eff);
}

}  // namespace doseins
