#ifndef DOSEINS_ADAPTIVE_HPP
#define DOSEINS_ADAPTIVE_HPP

// Post-insertion skeleton adaptation: Hedge weighting over {previous,
// refreshed} skeletons, follow-the-leader selection, and the three-candidate
// Bayesian mixture.

#include <string>
#include <vector>

namespace doseins {

struct Candidate {
  std::string label;
  double skeleton = 0.5;
};

struct CandidateSet {
  std::vector<Candidate> candidates;

  static CandidateSet hedge(double previous, double refreshed);
  /// (BLRM at d*, dose above d*, dose below d*), in that order.
  static CandidateSet mixture(double blrm, double above, double below);
  std::size_t size() const { return candidates.size(); }
};

struct WeightState {
  std::vector<double> weights;
  std::vector<double> cumulative_losses;
  int updates = 0;
  int degenerate_updates = 0;  // updates skipped because every likelihood was 0

  static WeightState uniform(std::size_t k);
};

struct IntervalOutcome {
  int n = 0;  // patients treated at d* during the interval
  int y = 0;  // DLTs (or responses) among them
};

inline constexpr double kSaturatedLoss = 1e12;
inline constexpr double kSkeletonFloor = 1e-6;

/// -y log p - (n - y) log(1 - p); binomial coefficient omitted.
double log_loss(double p, const IntervalOutcome& outcome);

/// w_k <- w_k exp(-loss_k) / sum, and cumulative losses += loss_k.
WeightState hedge_update(const WeightState& state, const CandidateSet& cands, const IntervalOutcome& outcome);

/// Convex combination sum_k w_k r_k.
double combined_skeleton(const WeightState& state, const CandidateSet& cands);

/// Candidate with the smallest cumulative loss; ties go to index 0.
double ftl_select(const WeightState& state, const CandidateSet& cands);

/// Bayes update with Binomial(n, r_k) predictive likelihoods.
WeightState mixture_posterior(const WeightState& state, const CandidateSet& cands, const IntervalOutcome& outcome);

enum class MixtureMode { kBlend, kMap };

double mixture_skeleton(const WeightState& state, const CandidateSet& cands, MixtureMode mode);

}  // namespace doseins

#endif  // DOSEINS_ADAPTIVE_HPP
