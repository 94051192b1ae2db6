#include "doseins/skeleton.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doseins/rng.hpp"
#include "doseins/stats.hpp"

namespace doseins {

// ---------------------------------------------------------------------------
// Grid

double DoseGrid::d_bar() const {
  if (doses.empty()) throw std::domain_error("empty dose grid");
  return std::accumulate(doses.begin(), doses.end(), 0.0) / static_cast<double>(doses.size());
}

void DoseGrid::validate() const {
  if (doses.empty()) throw std::domain_error("dose grid is empty");
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (!(doses[i] > 0) || !std::isfinite(doses[i])) throw std::domain_error("doses must be positive");
    if (i > 0 && !(doses[i] > doses[i - 1])) throw std::domain_error("doses must be strictly increasing");
  }
  if (!(d_ref > 0) || !std::isfinite(d_ref)) throw std::domain_error("reference dose must be positive");
  if (inserted_index && *inserted_index >= doses.size()) throw std::domain_error("inserted index out of range");
}

// ---------------------------------------------------------------------------
// BLRM

BlrmPrior BlrmPrior::for_target(double phi1) {
  BlrmPrior p;
  p.mu_alpha = logit(phi1);
  return p;
}

BlrmPosterior::BlrmPosterior(std::vector<double> alpha_nodes, std::vector<double> log_beta_nodes,
                             std::vector<double> weights, double d_ref)
    : alpha_(std::move(alpha_nodes)),
      log_beta_(std::move(log_beta_nodes)),
      weights_(std::move(weights)),
      d_ref_(d_ref) {
  if (weights_.size() != alpha_.size() * log_beta_.size()) {
    throw std::invalid_argument("BlrmPosterior: weight grid does not match node axes");
  }
}

BlrmPosterior BlrmPosterior::point_mass(double alpha, double beta, double d_ref) {
  if (!(beta > 0)) throw std::domain_error("BLRM slope must be positive");
  return BlrmPosterior({alpha}, {std::log(beta)}, {1.0}, d_ref);
}

double BlrmPosterior::mean_alpha() const {
  const std::size_t nb = log_beta_.size();
  double m = 0;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    double row = 0;
    for (std::size_t k = 0; k < nb; ++k) row += weights_[i * nb + k];
    m += row * alpha_[i];
  }
  return m;
}

double BlrmPosterior::mean_beta() const {
  const std::size_t nb = log_beta_.size();
  double m = 0;
  for (std::size_t k = 0; k < nb; ++k) {
    double col = 0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) col += weights_[i * nb + k];
    m += col * std::exp(log_beta_[k]);
  }
  return m;
}

BlrmPosterior::Moments BlrmPosterior::toxicity_moments(double dose) const {
  if (!(dose > 0)) throw std::domain_error("dose must be positive");
  const double x = std::log(dose / d_ref_);
  const std::size_t nb = log_beta_.size();
  std::vector<double> slope(nb);
  for (std::size_t k = 0; k < nb; ++k) slope[k] = std::exp(log_beta_[k]) * x;
  double m1 = 0;
  double m2 = 0;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    for (std::size_t k = 0; k < nb; ++k) {
      const double w = weights_[i * nb + k];
      if (w == 0) continue;
      const double p = inv_logit(alpha_[i] + slope[k]);
      m1 += w * p;
      m2 += w * p * p;
    }
  }
  return {m1, std::max(0.0, m2 - m1 * m1)};
}

double BlrmPosterior::plug_in(double dose) const {
  if (!(dose > 0)) throw std::domain_error("dose must be positive");
  return inv_logit(mean_alpha() + mean_beta() * std::log(dose / d_ref_));
}

BlrmPosterior fit_blrm(const DoseGrid& grid, std::span<const DoseCounts> data, const BlrmPrior& prior) {
  grid.validate();
  if (data.size() != grid.doses.size()) throw std::invalid_argument("fit_blrm: data/grid size mismatch");
  for (double h : {prior.mu_alpha, prior.sigma_alpha, prior.mu_beta, prior.sigma_beta, prior.span_sd}) {
    if (!std::isfinite(h)) throw std::domain_error("BLRM hyperparameters must be finite");
  }
  if (!(prior.sigma_alpha > 0 && prior.sigma_beta > 0 && prior.span_sd > 0) || prior.grid_points < 2) {
    throw std::domain_error("BLRM prior scales and grid size must be positive");
  }

  std::vector<double> x;
  std::vector<int> n;
  std::vector<int> t;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (data[j].n < 1) continue;
    x.push_back(std::log(grid.doses[j] / grid.d_ref));
    n.push_back(data[j].n);
    t.push_back(data[j].t);
  }
  if (x.empty()) throw std::invalid_argument("no data");

  const int g = prior.grid_points;
  std::vector<double> alpha(g);
  std::vector<double> log_beta(g);
  for (int i = 0; i < g; ++i) {
    const double z = -prior.span_sd + 2.0 * prior.span_sd * i / (g - 1);
    alpha[i] = prior.mu_alpha + prior.sigma_alpha * z;
    log_beta[i] = prior.mu_beta + prior.sigma_beta * z;
  }

  std::vector<double> logw(static_cast<std::size_t>(g) * g);
  std::vector<double> beta(g);
  for (int k = 0; k < g; ++k) beta[k] = std::exp(log_beta[k]);
  double max_logw = -INFINITY;
  for (int i = 0; i < g; ++i) {
    const double za = (alpha[i] - prior.mu_alpha) / prior.sigma_alpha;
    for (int k = 0; k < g; ++k) {
      const double zb = (log_beta[k] - prior.mu_beta) / prior.sigma_beta;
      double lw = -0.5 * (za * za + zb * zb);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double eta = alpha[i] + beta[k] * x[j];
        lw += t[j] * eta - n[j] * log1p_exp(eta);
      }
      logw[static_cast<std::size_t>(i) * g + k] = lw;
      max_logw = std::max(max_logw, lw);
    }
  }
  double total = 0;
  for (double& w : logw) {
    w = std::exp(w - max_logw);
    total += w;
  }
  for (double& w : logw) w /= total;
  return BlrmPosterior(std::move(alpha), std::move(log_beta), std::move(logw), grid.d_ref);
}

ToxicitySkeleton toxicity_skeleton(const BlrmPosterior& post, double d_star) {
  if (!(d_star > 0)) throw std::domain_error("inserted dose must be positive");
  const auto m = post.toxicity_moments(d_star);
  return {post.plug_in(d_star), m.mean, m.var};
}

// ---------------------------------------------------------------------------
// Fractional polynomials

std::pair<double, double> fp_basis(double d_std, double k1, double k2) {
  if (!(d_std > 0)) throw std::domain_error("standardized dose must be positive");
  const double ld = std::log(d_std);
  const double f1 = k1 == 0 ? ld : std::pow(d_std, k1);
  double f2;
  if (k1 == k2) {
    f2 = k1 == 0 ? ld * ld : std::pow(d_std, k1) * ld;
  } else {
    f2 = k2 == 0 ? ld : std::pow(d_std, k2);
  }
  return {f1, f2};
}

namespace {

struct FpDesign {
  std::vector<Eigen::Vector3d> rows;
  std::vector<int> n;
  std::vector<int> u;
};

FpDesign make_design(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar, double k1,
                     double k2) {
  if (doses.size() != data.size()) throw std::invalid_argument("FP fit: dose/data size mismatch");
  if (!(d_bar > 0)) throw std::domain_error("FP fit: d_bar must be positive");
  FpDesign d;
  for (std::size_t j = 0; j < doses.size(); ++j) {
    if (data[j].n < 1) continue;
    const auto [f1, f2] = fp_basis(doses[j] / d_bar, k1, k2);
    d.rows.emplace_back(1.0, f1, f2);
    d.n.push_back(data[j].n);
    d.u.push_back(data[j].u);
  }
  if (d.rows.empty()) throw std::invalid_argument("no data");
  return d;
}

double design_log_lik(const FpDesign& d, const Eigen::Vector3d& theta) {
  double ll = 0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const double eta = d.rows[i].dot(theta);
    ll += d.u[i] * eta - d.n[i] * log1p_exp(eta);
  }
  return ll;
}

Eigen::Vector3d design_gradient(const FpDesign& d, const Eigen::Vector3d& theta) {
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const double p = inv_logit(d.rows[i].dot(theta));
    g += (d.u[i] - d.n[i] * p) * d.rows[i];
  }
  return g;
}

Eigen::Matrix3d design_information(const FpDesign& d, const Eigen::Vector3d& theta) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const double p = inv_logit(d.rows[i].dot(theta));
    h += d.n[i] * p * (1 - p) * d.rows[i] * d.rows[i].transpose();
  }
  return h;
}

// Binomial terms dropped: they cancel in the deviance.
double binomial_kernel(int y, int n, double p) {
  double ll = 0;
  if (y > 0) ll += y * std::log(p);
  if (n - y > 0) ll += (n - y) * std::log1p(-p);
  return ll;
}

Eigen::Vector3d clamp_box(Eigen::Vector3d v) {
  for (int i = 0; i < 3; ++i) v[i] = std::clamp(v[i], -kFpCoefBound, kFpCoefBound);
  return v;
}

// Gradient with components zeroed where the box constraint is active.
Eigen::Vector3d projected(const Eigen::Vector3d& theta, const Eigen::Vector3d& g) {
  Eigen::Vector3d pg = g;
  for (int i = 0; i < 3; ++i) {
    if ((theta[i] >= kFpCoefBound && g[i] > 0) || (theta[i] <= -kFpCoefBound && g[i] < 0)) pg[i] = 0;
  }
  return pg;
}

}  // namespace

double fp_log_likelihood(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar,
                         double k1, double k2, const std::array<double, 3>& coef) {
  const auto d = make_design(doses, data, d_bar, k1, k2);
  return design_log_lik(d, Eigen::Vector3d(coef[0], coef[1], coef[2]));
}

std::array<double, 3> fp_gradient(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar,
                                  double k1, double k2, const std::array<double, 3>& coef) {
  const auto d = make_design(doses, data, d_bar, k1, k2);
  const auto g = design_gradient(d, Eigen::Vector3d(coef[0], coef[1], coef[2]));
  return {g[0], g[1], g[2]};
}

double saturated_log_likelihood(std::span<const DoseCounts> data) {
  double ll = 0;
  for (const auto& c : data) {
    if (c.n < 1) continue;
    ll += binomial_kernel(c.u, c.n, static_cast<double>(c.u) / c.n);
  }
  return ll;
}

FpFit fit_fp_mle(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar, double k1,
                 double k2) {
  const auto d = make_design(doses, data, d_bar, k1, k2);
  int n_total = 0;
  int u_total = 0;
  for (std::size_t i = 0; i < d.n.size(); ++i) {
    n_total += d.n[i];
    u_total += d.u[i];
  }
  Eigen::Vector3d theta(logit((u_total + 0.5) / (n_total + 1.0)), 0.0, 0.0);
  double ll = design_log_lik(d, theta);

  constexpr int kMaxIter = 200;
  constexpr double kGradTol = 1e-8;
  FpFit fit;
  fit.k1 = k1;
  fit.k2 = k2;
  fit.d_bar = d_bar;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    const Eigen::Vector3d g = design_gradient(d, theta);
    if (projected(theta, g).norm() < kGradTol) {
      fit.converged = true;
      break;
    }
    // Newton on the coordinates not held at the box by the gradient.
    Eigen::Matrix3d info = design_information(d, theta);
    const Eigen::Vector3d pg = projected(theta, g);
    for (int i = 0; i < 3; ++i) {
      if (pg[i] == 0 && g[i] != 0) {
        info.row(i).setZero();
        info.col(i).setZero();
        info(i, i) = 1;
      }
    }
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    double tau = 0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::LLT<Eigen::Matrix3d> llt(info + tau * Eigen::Matrix3d::Identity());
      if (llt.info() == Eigen::Success) {
        step = llt.solve(pg);
        if (step.allFinite()) break;
      }
      tau = tau == 0 ? 1e-10 * (1 + info.trace()) : tau * 10;
    }
    auto search = [&](const Eigen::Vector3d& dir) {
      double scale = 1.0;
      for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
        const Eigen::Vector3d cand = clamp_box(theta + scale * dir);
        const double cand_ll = design_log_lik(d, cand);
        if (cand_ll > ll) {
          theta = cand;
          ll = cand_ll;
          return true;
        }
      }
      return false;
    };
    bool improved = search(step);
    if (!improved) improved = search(pg / (1 + info.trace()));
    if (!improved) break;
  }
  fit.iterations = iter;
  fit.coef = {theta[0], theta[1], theta[2]};
  fit.log_lik = ll;
  fit.at_bound = (theta.cwiseAbs().array() >= kFpCoefBound).any();
  fit.deviance = std::max(0.0, -2.0 * (ll - saturated_log_likelihood(data)));
  // A stalled line search at the optimum is still an optimum.
  if (!fit.converged) fit.converged = projected(theta, design_gradient(d, theta)).norm() < 1e-6;
  return fit;
}

FpFit select_fp_powers(std::span<const double> doses, std::span<const DoseCounts> data, double d_bar) {
  constexpr double kTieTol = 1e-9;
  std::optional<FpFit> best;
  for (std::size_t i = 0; i < kFpPowers.size(); ++i) {
    for (std::size_t j = i; j < kFpPowers.size(); ++j) {
      FpFit f = fit_fp_mle(doses, data, d_bar, kFpPowers[i], kFpPowers[j]);
      if (!best) {
        best = f;
        continue;
      }
      if (f.deviance < best->deviance - kTieTol) {
        best = f;
      } else if (f.deviance <= best->deviance + kTieTol) {
        // Enumeration order is already lexicographic, so only the magnitude rule can displace.
        const double mag = std::abs(f.k1) + std::abs(f.k2);
        const double best_mag = std::abs(best->k1) + std::abs(best->k2);
        if (mag < best_mag) best = f;
      }
    }
  }
  return *best;
}

EfficacySkeleton efficacy_skeleton(const FpFit& fit, std::span<const double> doses,
                                   std::span<const DoseCounts> data, double d_star, const FpPrior& prior) {
  if (!(d_star > 0)) throw std::domain_error("inserted dose must be positive");
  if (!(prior.coef_sd > 0) || prior.samples < 2) throw std::domain_error("invalid FP prior");
  const auto d = make_design(doses, data, fit.d_bar, fit.k1, fit.k2);
  const Eigen::Vector3d theta(fit.coef[0], fit.coef[1], fit.coef[2]);

  EfficacySkeleton out;
  Eigen::Matrix3d precision =
      design_information(d, theta) + Eigen::Matrix3d::Identity() / (prior.coef_sd * prior.coef_sd);
  Eigen::Matrix3d cov = precision.inverse();
  Eigen::LLT<Eigen::Matrix3d> chol(cov);
  if (!cov.allFinite() || chol.info() != Eigen::Success) {
    out.ridge_fallback = true;
    precision += 1e-6 * Eigen::Matrix3d::Identity();
    cov = precision.inverse();
    chol.compute(cov);
  }
  const Eigen::Matrix3d lower = chol.matrixL();

  const auto [f1, f2] = fp_basis(d_star / fit.d_bar, fit.k1, fit.k2);
  const Eigen::Vector3d row(1.0, f1, f2);
  RngStream rng(prior.seed, 0);
  double m1 = 0;
  double m2 = 0;
  for (int s = 0; s < prior.samples; ++s) {
    const Eigen::Vector3d z(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    const double p = inv_logit(row.dot(theta + lower * z));
    m1 += p;
    m2 += p * p;
  }
  const double ns = prior.samples;
  out.mu = m1 / ns;
  out.var = std::max(1e-8, (m2 - ns * out.mu * out.mu) / (ns - 1));
  out.v = out.mu;
  return out;
}

// ---------------------------------------------------------------------------
// Effective sample size

double ess_from_moments(double mu, double var) {
  if (!(mu > 0 && mu < 1)) throw std::domain_error("ESS mean must lie in (0, 1)");
  if (!(var > 0)) throw std::domain_error("ESS variance must be positive");
  const double bernoulli = mu * (1 - mu);
  if (var >= bernoulli) return 0.0;
  return std::max(0.0, bernoulli / var - 1.0);
}

AdjustedEss adjust_ess(double ess, double gamma, int cap) {
  if (!(gamma > 0 && gamma <= 1)) throw std::domain_error("ESS scaling factor must lie in (0, 1]");
  const double value = std::clamp(gamma * ess, 0.0, static_cast<double>(std::max(cap, 0)));
  return {value, static_cast<int>(std::floor(value + 0.5))};
}

SkeletonBundle build_skeleton_bundle(const DoseGrid& grid, std::span<const DoseCounts> data, std::size_t index,
                                     const SkeletonConfig& cfg, bool with_efficacy) {
  grid.validate();
  if (index >= grid.doses.size()) throw std::domain_error("skeleton target index out of range");
  const double d_star = grid.doses[index];
  SkeletonBundle b;
  for (const auto& c : data) b.cap = std::max(b.cap, c.n);

  const auto post = fit_blrm(grid, data, cfg.blrm);
  const auto tox = toxicity_skeleton(post, d_star);
  constexpr double kEdge = 1e-6;
  b.r = std::clamp(tox.r, kEdge, 1 - kEdge);
  b.mu_T = tox.mu;
  b.var_T = tox.var;
  b.ess_T = b.var_T > 0 && b.mu_T > 0 && b.mu_T < 1 ? ess_from_moments(b.mu_T, b.var_T) : 0.0;
  b.adj_T = adjust_ess(b.ess_T, cfg.gamma1, b.cap);
  b.provenance["r"] = "blrm-plug-in";
  b.provenance["ess_T"] = "blrm-quadrature-moments";

  if (with_efficacy) {
    const double d_bar = grid.d_bar();
    const auto fit = select_fp_powers(grid.doses, data, d_bar);
    const auto eff = efficacy_skeleton(fit, grid.doses, data, d_star, cfg.fp);
    b.v = std::clamp(eff.v, kEdge, 1 - kEdge);
    b.mu_E = eff.mu;
    b.var_E = eff.var;
    b.ess_E = b.mu_E > 0 && b.mu_E < 1 ? ess_from_moments(b.mu_E, b.var_E) : 0.0;
    b.adj_E = adjust_ess(b.ess_E, cfg.gamma2, b.cap);
    b.fp_powers = std::make_pair(fit.k1, fit.k2);
    b.provenance["v"] = eff.ridge_fallback ? "fp-laplace-ridge" : "fp-laplace";
    b.provenance["ess_E"] = fit.converged ? "fp-laplace-moments" : "fp-laplace-moments-unconverged";
  }
  return b;
}

}  // namespace doseins
