#include "doseins/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doseins/stats.hpp"

namespace doseins {

namespace {

void check_pair(const WeightState& state, const CandidateSet& cands) {
  if (state.weights.size() != cands.size() || cands.size() == 0) {
    throw std::invalid_argument("weight state and candidate set sizes differ");
  }
}

void check_outcome(const IntervalOutcome& o) {
  if (o.n < 0 || o.y < 0 || o.y > o.n) throw std::domain_error("interval outcome needs 0 <= y <= n");
}

double clamp_skeleton(double p) { return std::clamp(p, kSkeletonFloor, 1 - kSkeletonFloor); }

void normalize(std::vector<double>& w) {
  double total = 0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
}

}  // namespace

CandidateSet CandidateSet::hedge(double previous, double refreshed) {
  return {{{"previous", clamp_skeleton(previous)}, {"refreshed", clamp_skeleton(refreshed)}}};
}

CandidateSet CandidateSet::mixture(double blrm, double above, double below) {
  return {{{"blrm", clamp_skeleton(blrm)}, {"above", clamp_skeleton(above)}, {"below", clamp_skeleton(below)}}};
}

WeightState WeightState::uniform(std::size_t k) {
  WeightState s;
  s.weights.assign(k, 1.0 / static_cast<double>(k));
  s.cumulative_losses.assign(k, 0.0);
  return s;
}

double log_loss(double p, const IntervalOutcome& outcome) {
  check_outcome(outcome);
  if (outcome.n == 0) return 0.0;
  double loss = 0;
  if (outcome.y > 0) loss += p <= 0 ? kSaturatedLoss : -outcome.y * std::log(p);
  if (outcome.n - outcome.y > 0) loss += p >= 1 ? kSaturatedLoss : -(outcome.n - outcome.y) * std::log1p(-p);
  return std::min(loss, kSaturatedLoss);
}

WeightState hedge_update(const WeightState& state, const CandidateSet& cands, const IntervalOutcome& outcome) {
  check_pair(state, cands);
  WeightState next = state;
  std::vector<double> loss(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) loss[k] = log_loss(cands.candidates[k].skeleton, outcome);
  // Shift by the smallest loss; the common factor cancels on normalization.
  const double min_loss = *std::min_element(loss.begin(), loss.end());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    next.weights[k] = state.weights[k] * std::exp(-(loss[k] - min_loss));
    next.cumulative_losses[k] += loss[k];
  }
  normalize(next.weights);
  ++next.updates;
  return next;
}

double combined_skeleton(const WeightState& state, const CandidateSet& cands) {
  check_pair(state, cands);
  double r = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) r += state.weights[k] * cands.candidates[k].skeleton;
  return r;
}

double ftl_select(const WeightState& state, const CandidateSet& cands) {
  check_pair(state, cands);
  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (state.cumulative_losses[k] < state.cumulative_losses[best]) best = k;
  }
  return cands.candidates[best].skeleton;
}

WeightState mixture_posterior(const WeightState& state, const CandidateSet& cands, const IntervalOutcome& outcome) {
  check_pair(state, cands);
  check_outcome(outcome);
  WeightState next = state;
  std::vector<double> m(cands.size());
  double evidence = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    m[k] = binomial_pmf(outcome.y, outcome.n, cands.candidates[k].skeleton);
    next.cumulative_losses[k] += log_loss(cands.candidates[k].skeleton, outcome);
    evidence += state.weights[k] * m[k];
  }
  ++next.updates;
  if (!(evidence > 0)) {
    ++next.degenerate_updates;
    return next;
  }
  for (std::size_t k = 0; k < cands.size(); ++k) next.weights[k] = state.weights[k] * m[k] / evidence;
  normalize(next.weights);
  return next;
}

double mixture_skeleton(const WeightState& state, const CandidateSet& cands, MixtureMode mode) {
  check_pair(state, cands);
  if (mode == MixtureMode::kBlend) return combined_skeleton(state, cands);
  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (state.weights[k] > state.weights[best]) best = k;
  }
  return cands.candidates[best].skeleton;
}

}  // namespace doseins
