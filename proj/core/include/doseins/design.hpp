#ifndef DOSEINS_DESIGN_HPP
#define DOSEINS_DESIGN_HPP

// Decision boundaries and hypothesis priors for BOIN, BOIN-ET, iBOIN and
// M-iBOIN-ET. Every function here is a pure function of its arguments.

#include <array>
#include <optional>

namespace doseins {

/// Toxicity hypotheses: H1 p = phi1 (target), H2 p = phi2 (below), H3 p = phi3 (above).
struct ToxicityTargets {
  double phi1 = 0.30;
  double phi2 = 0.18;
  double phi3 = 0.42;

  /// Throws std::domain_error unless 0 < phi2 < phi1 < phi3 < 1.
  void validate() const;
};

/// Efficacy hypotheses: delta1 target efficacy, delta2 below-target efficacy.
struct EfficacyTargets {
  double delta1 = 0.5;
  double delta2 = 0.3;

  void validate() const;
};

struct ToxicityBoundaries {
  double lambda_e = 0;  // escalate if p_hat <= lambda_e
  double lambda_d = 0;  // de-escalate if p_hat >= lambda_d
};

struct EtBoundaries {
  double lambda1 = 0;
  double lambda2 = 0;
  double eta = 0;
};

/// Prior probabilities of (H1, H2, H3).
struct ToxicityPrior {
  std::array<double, 3> pi{1.0 / 3, 1.0 / 3, 1.0 / 3};

  static ToxicityPrior uniform() { return {}; }
};

/// Prior probabilities of H_km: row k is the toxicity hypothesis (1..3),
/// column m the efficacy hypothesis (1..2).
struct JointPrior {
  std::array<std::array<double, 2>, 3> pi{{{1.0 / 6, 1.0 / 6}, {1.0 / 6, 1.0 / 6}, {1.0 / 6, 1.0 / 6}}};

  static JointPrior uniform() { return {}; }
  double sum() const;
};

/// Skeleton and effective sample size of the inserted dose. `s` drives both
/// binomial sums; `s_efficacy` overrides it for the efficacy sum when the two
/// skeletons carry different amounts of information.
struct PriorStrength {
  int s = 0;
  double r = 0.5;
  std::optional<double> v;
  std::optional<int> s_efficacy;
};

ToxicityBoundaries boin_boundaries(const ToxicityTargets& targets);

ToxicityPrior iboin_hypothesis_prior(const PriorStrength& strength, const ToxicityTargets& targets);

/// Informative boundaries at a dose with `n` treated patients (n >= 1).
ToxicityBoundaries iboin_boundaries(const ToxicityPrior& prior, int n, const ToxicityTargets& targets);

JointPrior iboinet_hypothesis_prior(const PriorStrength& strength, const ToxicityTargets& targets,
                                    const EfficacyTargets& eff);

/// M-iBOIN-ET thresholds (lambda*_e,ET, lambda*_d,ET, eta*) at a dose with n patients.
EtBoundaries iboinet_boundaries(const JointPrior& prior, int n, const ToxicityTargets& targets,
                                const EfficacyTargets& eff);

/// Non-informative BOIN-ET thresholds: the uniform-prior case of the above.
EtBoundaries boinet_boundaries(const ToxicityTargets& targets, const EfficacyTargets& eff);

}  // namespace doseins

#endif  // DOSEINS_DESIGN_HPP
