#ifndef DOSEINS_SKELETON_HPP
#define DOSEINS_SKELETON_HPP

// Skeletons and effective sample sizes for a dose inserted mid-trial, built
// from everything observed at the other doses.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace doseins {

struct DoseCounts {
  int n = 0;  // treated
  int t = 0;  // DLTs
  int u = 0;  // responses

  friend bool operator==(const DoseCounts&, const DoseCounts&) = default;
};

using DoseData = std::vector<DoseCounts>;

struct DoseGrid {
  std::vector<double> doses;  // mg, strictly increasing
  double d_ref = 0;
  std::optional<std::size_t> inserted_index;

  /// Mean of all planned doses, including an inserted dose once it is on the grid.
  double d_bar() const;
  /// Throws std::domain_error for empty, non-positive or unordered grids.
  void validate() const;
  std::size_t size() const { return doses.size(); }
};

/// Normal prior on the intercept and on log(slope).
struct BlrmPrior {
  double mu_alpha = -0.8472978603872037;  // logit(0.3)
  double sigma_alpha = 2.0;
  double mu_beta = 0.0;
  double sigma_beta = 1.0;
  int grid_points = 201;
  double span_sd = 6.0;

  static BlrmPrior for_target(double phi1);
};

/// Posterior of (alpha, log beta) on a tensor grid with normalized weights.
class BlrmPosterior {
 public:
  struct Moments {
    double mean = 0;
    double var = 0;
  };

  BlrmPosterior(std::vector<double> alpha_nodes, std::vector<double> log_beta_nodes,
                std::vector<double> weights, double d_ref);

  /// Point mass at (alpha, beta).
  static BlrmPosterior point_mass(double alpha, double beta, double d_ref);

  double mean_alpha() const;
  double mean_beta() const;
  /// Posterior mean and variance of p_T(dose).
  Moments toxicity_moments(double dose) const;
  /// inverse-logit(mean alpha + mean beta * log(dose / d_ref))
  double plug_in(double dose) const;

  double d_ref() const { return d_ref_; }
  std::span<const double> alpha_nodes() const { return alpha_; }
  std::span<const double> log_beta_nodes() const { return log_beta_; }
  /// Row-major: weights()[i * log_beta_nodes().size() + k].
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> alpha_;
  std::vector<double> log_beta_;
  std::vector<double> weights_;
  double d_ref_;
};

/// Throws std::invalid_argument("no data") when no dose has n >= 1.
BlrmPosterior fit_blrm(const DoseGrid& grid, std::span<const DoseCounts> data, const BlrmPrior& prior);

struct ToxicitySkeleton {
  double r = 0;   // plug-in skeleton at posterior-mean parameters
  double mu = 0;  // posterior mean of p_T(d*)
  double var = 0;
};

ToxicitySkeleton toxicity_skeleton(const BlrmPosterior& post, double d_star);

inline constexpr std::array<double, 7> kFpPowers{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};

/// Second-degree fractional-polynomial basis at a standardized dose.
std::pair<double, double> fp_basis(double d_std, double k1, double k2);

struct FpFit {
  double k1 = 1;
  double k2 = 1;
  std::array<double, 3> coef{};  // (alpha, beta1, beta2)
  double log_lik = 0;
  double deviance = 0;
  double d_bar = 1;
  bool converged = false;
  bool at_bound = false;  // a coefficient sits on the |coef| <= 20 clamp
  int iterations = 0;
};

inline constexpr double kFpCoefBound = 20.0;

/// Binomial log-likelihood of the FP model and its gradient (for checking).
double fp_log_likelihood(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar,
                         double k1, double k2, const std::array<double, 3>& coef);
std::array<double, 3> fp_gradient(std::span<const double> doses, std::span<const DoseCounts> data,
                                  double d_bar, double k1, double k2, const std::array<double, 3>& coef);
/// Saturated binomial log-likelihood of the responses, with 0 log 0 = 0.
double saturated_log_likelihood(std::span<const DoseCounts> data);

/// Maximum-likelihood fit for fixed powers; damped Newton with step halving.
FpFit fit_fp_mle(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar, double k1,
                 double k2);

/// Minimum-deviance fit over the 28 unordered power pairs.
FpFit select_fp_powers(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar);

struct FpPrior {
  double coef_sd = 2.0;
  int samples = 4096;
  std::uint64_t seed = 0x5EED5EEDULL;
};

struct EfficacySkeleton {
  double v = 0;
  double mu = 0;
  double var = 0;
  bool ridge_fallback = false;
};

/// Laplace approximation at the MLE, pushed through the inverse logit at d*.
EfficacySkeleton efficacy_skeleton(const FpFit& fit, std::span<const double> doses,
                                   std::span<const DoseCounts> data, double d_star, const FpPrior& prior);

/// Beta moment-matched sample size mu(1 - mu) / var - 1, floored at 0.
double ess_from_moments(double mu, double var);

struct AdjustedEss {
  double value = 0;  // min(gamma * ess, cap), >= 0
  int s = 0;         // value rounded half-up
};

AdjustedEss adjust_ess(double ess, double gamma, int cap);

struct SkeletonConfig {
  BlrmPrior blrm;
  FpPrior fp;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
};

struct SkeletonBundle {
  double r = 0;
  std::optional<double> v;
  double mu_T = 0;
  double var_T = 0;
  double mu_E = 0;
  double var_E = 0;
  double ess_T = 0;
  double ess_E = 0;
  AdjustedEss adj_T;
  AdjustedEss adj_E;
  int cap = 0;
  std::optional<std::pair<double, double>> fp_powers;
  std::map<std::string, std::string> provenance;
};

/// Toxicity (and optionally efficacy) skeleton at grid.doses[index] from all
/// observed data. `data` is aligned with grid.doses. The ESS cap
/// is the largest n among the doses with data.
SkeletonBundle build_skeleton_bundle(const DoseGrid& grid, std::span<const DoseCounts> data,
                                     std::size_t index, const SkeletonConfig& cfg, bool with_efficacy);

}  // namespace doseins

#endif  // DOSEINS_SKELETON_HPP
