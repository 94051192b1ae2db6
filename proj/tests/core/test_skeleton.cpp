#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "doseins/rng.hpp"
#include "doseins/skeleton.hpp"
#include "doseins/stats.hpp"
#include "oracles.hpp"

using namespace doseins;

namespace {

DoseGrid fixed_grid() { return {{300, 900, 1500, 2400}, 2400, std::nullopt}; }
DoseData fixed_data() { return {{3, 0, 0}, {3, 0, 0}, {6, 1, 0}, {6, 3, 3}}; }

std::vector<oracle::Obs> tox_obs(const DoseGrid& g, const DoseData& d) {
  std::vector<oracle::Obs> o;
  for (std::size_t j = 0; j < d.size(); ++j) o.push_back({g.doses[j], d[j].n, d[j].t});
  return o;
}

std::vector<oracle::Obs> eff_obs(const std::vector<double>& doses, const DoseData& d) {
  std::vector<oracle::Obs> o;
  for (std::size_t j = 0; j < d.size(); ++j) o.push_back({doses[j], d[j].n, d[j].u});
  return o;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("blrm") {
  TEST_CASE("fixed-case skeleton against a dense-grid oracle") {
    const auto grid = fixed_grid();
    const auto data = fixed_data();
    const BlrmPrior prior = BlrmPrior::for_target(0.3);
    const auto post = fit_blrm(grid, data, prior);
    const auto sk = toxicity_skeleton(post, 2100);
    const auto o = oracle::blrm_dense(tox_obs(grid, data), 2400, 2100, logit(0.3), 2, 0, 1);
    CHECK(std::fabs(sk.r - static_cast<double>(o.r)) < 1e-3);
    CHECK(std::fabs(sk.mu - static_cast<double>(o.mu)) < 1e-3);
    CHECK(std::fabs(sk.var - static_cast<double>(o.var)) < 1e-3);
    const auto lo = oracle::blrm_dense(tox_obs(grid, data), 2400, 1500, logit(0.3), 2, 0, 1);
    const auto hi = oracle::blrm_dense(tox_obs(grid, data), 2400, 2400, logit(0.3), 2, 0, 1);
    CHECK(sk.mu > static_cast<double>(lo.mu));
    CHECK(sk.mu < static_cast<double>(hi.mu));
  }

  TEST_CASE("doubling the grid resolution barely moves the moments") {
    BlrmPrior coarse = BlrmPrior::for_target(0.3);
    BlrmPrior fine = coarse;
    fine.grid_points = 401;
    const auto a = toxicity_skeleton(fit_blrm(fixed_grid(), fixed_data(), coarse), 2100);
    const auto b = toxicity_skeleton(fit_blrm(fixed_grid(), fixed_data(), fine), 2100);
    CHECK(std::fabs(a.mu - b.mu) < 1e-3);
    CHECK(std::fabs(a.var - b.var) < 1e-3);
  }

  TEST_CASE("posterior weights are normalized and the curve increases with dose") {
    const auto post = fit_blrm(fixed_grid(), fixed_data(), BlrmPrior::for_target(0.3));
    double s = 0;
    for (double w : post.weights()) s += w;
    CHECK(std::fabs(s - 1) < 1e-12);
    double last = 0;
    for (double d : {100.0, 300.0, 900.0, 1500.0, 2100.0, 2400.0, 4000.0}) {
      const double m = post.toxicity_moments(d).mean;
      CHECK(m > last);
      last = m;
    }
  }

  TEST_CASE("all-toxic data raises the posterior mean above the prior mean") {
    const DoseGrid g{{100, 200, 400}, 400, std::nullopt};
    const DoseData all{{3, 3, 0}, {3, 3, 0}, {3, 3, 0}};
    const auto post = fit_blrm(g, all, BlrmPrior::for_target(0.3));
    const auto pr = oracle::blrm_dense({}, 400, 100, logit(0.3), 2, 0, 1, 401, 8);
    CHECK(post.toxicity_moments(100).mean > static_cast<double>(pr.mu));
  }

  TEST_CASE("an untried dose leaves the posterior unchanged") {
    const DoseGrid g3{{300, 900, 1500}, 1500, std::nullopt};
    const DoseGrid g4{{300, 900, 1200, 1500}, 1500, std::nullopt};
    const DoseData a{{3, 0, 0}, {3, 1, 0}, {3, 2, 0}};
    const DoseData b{{3, 0, 0}, {3, 1, 0}, {0, 0, 0}, {3, 2, 0}};
    const auto pa = fit_blrm(g3, a, BlrmPrior::for_target(0.3));
    const auto pb = fit_blrm(g4, b, BlrmPrior::for_target(0.3));
    CHECK(std::vector<double>(pa.weights().begin(), pa.weights().end()) ==
          std::vector<double>(pb.weights().begin(), pb.weights().end()));
  }

  TEST_CASE("point mass and reference-dose plug-in") {
    const auto pm = BlrmPosterior::point_mass(-0.4, 1.3, 2400);
    const auto sk = toxicity_skeleton(pm, 2100);
    CHECK(sk.r == doctest::Approx(inv_logit(-0.4 + 1.3 * std::log(2100.0 / 2400))).epsilon(1e-15));
    CHECK(sk.var == doctest::Approx(0).epsilon(1e-15));
    const auto post = fit_blrm(fixed_grid(), fixed_data(), BlrmPrior::for_target(0.3));
    CHECK(toxicity_skeleton(post, 2400).r == doctest::Approx(inv_logit(post.mean_alpha())).epsilon(1e-14));
  }

  TEST_CASE("errors") {
    const DoseData none{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    CHECK_THROWS_AS(fit_blrm(fixed_grid(), none, BlrmPrior{}), std::invalid_argument);
    BlrmPrior bad;
    bad.sigma_alpha = NAN;
    CHECK_THROWS_AS(fit_blrm(fixed_grid(), fixed_data(), bad), std::domain_error);
    const auto post = fit_blrm(fixed_grid(), fixed_data(), BlrmPrior{});
    CHECK_THROWS_AS(toxicity_skeleton(post, 0), std::domain_error);
  }
}

TEST_SUITE("fp") {
  TEST_CASE("basis cases") {
    for (double k1 : kFpPowers) {
      for (double k2 : kFpPowers) {
        const auto [f1, f2] = fp_basis(1.0, k1, k2);
        CHECK(f1 == (k1 == 0 ? 0.0 : 1.0));
        const bool has_log = k1 == k2 || k2 == 0;
        CHECK(f2 == (has_log ? 0.0 : 1.0));
      }
    }
    auto [a, b] = fp_basis(2.0, 0, 0);
    CHECK(a == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(b == doctest::Approx(0.480453).epsilon(1e-6));
    auto [c, d] = fp_basis(0.5, -1, -1);
    CHECK(c == doctest::Approx(2.0));
    CHECK(d == doctest::Approx(-1.386294).epsilon(1e-6));
    CHECK_THROWS_AS(fp_basis(0, 1, 1), std::domain_error);
  }

  TEST_CASE("exactly representable proportions give zero deviance") {
    // Three free coefficients interpolate any two doses.
    const std::vector<double> doses{300, 900};
    const DoseData data{{10, 0, 3}, {10, 0, 7}};
    CHECK(fit_fp_mle(doses, data, 900, 1, 2).deviance < 1e-6);
  }

  TEST_CASE("single informative dose is interpolated") {
    const std::vector<double> doses{300, 900};
    const DoseData data{{6, 2, 2}, {0, 0, 0}};
    const auto fit = select_fp_powers(doses, data, 600);
    CHECK(fit.deviance < 1e-6);
  }

  TEST_CASE("deviance on (0, 0.5, 1) matches an independent optimizer") {
    const std::vector<double> doses{300, 900, 1500};
    const DoseData data{{4, 0, 0}, {4, 2, 2}, {4, 4, 4}};
    const double dbar = 900;
    const auto obs = eff_obs(doses, data);
    for (double k1 : {-1.0, 0.0, 1.0}) {
      for (double k2 : {0.5, 2.0}) {
        const auto fit = fit_fp_mle(doses, data, dbar, k1, k2);
        const auto best = oracle::fp_max_loglik(obs, dbar, k1, k2);
        const double dev = static_cast<double>(-2 * (best - oracle::saturated_loglik(obs)));
        CHECK(std::fabs(fit.deviance - dev) < 1e-4);
      }
    }
  }

  TEST_CASE("all-zero responses give a flat zero curve") {
    const std::vector<double> doses{300, 900, 1500, 2400};
    const DoseData data{{3, 0, 0}, {3, 0, 0}, {6, 0, 0}, {6, 0, 0}};
    const auto fit = select_fp_powers(doses, data, 1275);
    CHECK(fit.deviance < 1e-6);
    for (double d : doses) {
      const auto [f1, f2] = fp_basis(d / 1275, fit.k1, fit.k2);
      CHECK(inv_logit(fit.coef[0] + fit.coef[1] * f1 + fit.coef[2] * f2) < 1e-3);
    }
  }

  TEST_CASE("selection is the minimum over every pair") {
    RngStream rng(99, 0);
    const std::vector<double> doses{300, 900, 1500, 2100, 2400};
    const double dbar = mean_of(doses);
    for (int rep = 0; rep < 20; ++rep) {
      DoseData data;
      double p = rng.uniform(0.05, 0.4);
      for (std::size_t j = 0; j < doses.size(); ++j) {
        const int n = 3 * rng.uniform_int(1, 4);
        int u = 0;
        for (int i = 0; i < n; ++i) u += rng.uniform() < p ? 1 : 0;
        data.push_back({n, 0, u});
        p = std::min(0.95, p + rng.uniform(0, 0.2));
      }
      const auto sel = select_fp_powers(doses, data, dbar);
      for (std::size_t i = 0; i < kFpPowers.size(); ++i) {
        for (std::size_t k = i; k < kFpPowers.size(); ++k) {
          CHECK(sel.deviance <= fit_fp_mle(doses, data, dbar, kFpPowers[i], kFpPowers[k]).deviance + 1e-9);
        }
      }
    }
  }

  TEST_CASE("data generated from (1, 2) select a pair at least as good as (1, 2)") {
    const std::vector<double> doses{300, 900, 1500, 2100, 2400};
    const double dbar = mean_of(doses);
    DoseData data;
    for (double d : doses) {
      const double x = d / dbar;
      const double p = inv_logit(-1.0 + 0.8 * x + 0.3 * x * x);
      const int n = 100000;
      data.push_back({n, 0, static_cast<int>(std::lround(p * n))});
    }
    const auto sel = select_fp_powers(doses, data, dbar);
    CHECK(sel.deviance <= fit_fp_mle(doses, data, dbar, 1, 2).deviance + 1e-9);
    CHECK(sel.deviance < 1e-2);
  }

  TEST_CASE("gradient matches central differences and vanishes at the optimum") {
    RngStream rng(7, 7);
    const std::vector<double> doses{300, 900, 1500, 2400};
    const double dbar = mean_of(doses);
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
      DoseData data;
      for (std::size_t j = 0; j < doses.size(); ++j) {
        const int n = 3 * rng.uniform_int(1, 4);
        data.push_back({n, 0, rng.uniform_int(0, n)});
      }
      const auto fit = select_fp_powers(doses, data, dbar);
      if (fit.at_bound) continue;
      ++checked;
      const auto g = fp_gradient(doses, data, dbar, fit.k1, fit.k2, fit.coef);
      CHECK(std::hypot(g[0], g[1], g[2]) < 1e-6);
      // Away from the optimum the analytic gradient is non-zero; compare it there.
      std::array<double, 3> at = fit.coef;
      at[0] += 0.3;
      at[1] -= 0.2;
      const auto ga = fp_gradient(doses, data, dbar, fit.k1, fit.k2, at);
      const double h = 1e-5;
      for (int i = 0; i < 3; ++i) {
        auto up = at;
        auto dn = at;
        up[i] += h;
        dn[i] -= h;
        const double fd = (fp_log_likelihood(doses, data, dbar, fit.k1, fit.k2, up) -
                           fp_log_likelihood(doses, data, dbar, fit.k1, fit.k2, dn)) /
                          (2 * h);
        CHECK(std::fabs(fd - ga[i]) <= 1e-3 * std::max(1.0, std::fabs(fd)));
      }
    }
    CHECK(checked > 10);
  }
}

TEST_SUITE("efficacy-skeleton") {
  TEST_CASE("Laplace moments agree with a large-sample run") {
    // u=(0,1,2,3) keeps the fit off the coefficient clamp.
    const std::vector<double> doses{300, 900, 1500, 2400};
    const DoseData data{{3, 0, 0}, {3, 0, 1}, {6, 1, 2}, {6, 3, 3}};
    const double dbar = (300 + 900 + 1500 + 2100 + 2400) / 5.0;
    const auto fit = select_fp_powers(doses, data, dbar);
    const FpPrior prior;
    const auto sk = efficacy_skeleton(fit, doses, data, 2100, prior);

    // Independent covariance: the observed information in closed form plus the prior precision.
    oracle::real h[3][3] = {};
    for (std::size_t j = 0; j < doses.size(); ++j) {
      const auto f = oracle::fp_terms(doses[j] / dbar, fit.k1, fit.k2);
      const oracle::real x[3] = {1, f[0], f[1]};
      const oracle::real eta = fit.coef[0] + fit.coef[1] * x[1] + fit.coef[2] * x[2];
      const oracle::real p = 1 / (1 + std::exp(-eta));
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) h[a][b] += data[j].n * p * (1 - p) * x[a] * x[b];
    }
    for (int a = 0; a < 3; ++a) h[a][a] += 1 / (prior.coef_sd * prior.coef_sd);
    // Cholesky of the precision, then solve L^T x = z for draws with covariance H^-1.
    oracle::real l[3][3] = {};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j <= i; ++j) {
        oracle::real s = h[i][j];
        for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
        l[i][j] = i == j ? std::sqrt(s) : s / l[j][j];
      }
    }
    const auto fs = oracle::fp_terms(2100 / dbar, fit.k1, fit.k2);
    std::mt19937_64 gen(424242);
    std::normal_distribution<double> nd;
    const int draws = 1000000;
    oracle::real m1 = 0, m2 = 0;
    for (int s = 0; s < draws; ++s) {
      const oracle::real z[3] = {nd(gen), nd(gen), nd(gen)};
      oracle::real x[3];
      for (int i = 2; i >= 0; --i) {
        oracle::real s2 = z[i];
        for (int k = i + 1; k < 3; ++k) s2 -= l[k][i] * x[k];
        x[i] = s2 / l[i][i];
      }
      const oracle::real eta = fit.coef[0] + x[0] + (fit.coef[1] + x[1]) * fs[0] + (fit.coef[2] + x[2]) * fs[1];
      const oracle::real p = 1 / (1 + std::exp(-eta));
      m1 += p;
      m2 += p * p;
    }
    const double mu = static_cast<double>(m1 / draws);
    const double var = static_cast<double>(m2 / draws - (m1 / draws) * (m1 / draws));
    const double se_mu = std::sqrt(var / prior.samples + var / draws);
    CHECK(std::fabs(sk.mu - mu) < 2 * se_mu);
    // Var of the sample variance for a variable bounded in [0, 1] is at most var / n.
    const double se_var = std::sqrt(var / prior.samples);
    CHECK(std::fabs(sk.var - var) < 2 * se_var);
    CHECK(sk.v == sk.mu);
  }

  TEST_CASE("large n at d* drives the estimate to the observed rate") {
    const std::vector<double> doses{300, 900, 1500};
    const DoseData data{{400, 0, 120}, {400, 0, 200}, {400, 0, 280}};
    const auto fit = select_fp_powers(doses, data, 900);
    const auto sk = efficacy_skeleton(fit, doses, data, 900, FpPrior{});
    CHECK(std::fabs(sk.mu - 0.5) < 0.02);
  }
}

TEST_SUITE("ess") {
  TEST_CASE("moment matching") {
    CHECK(ess_from_moments(0.5, 1.0 / 12) == 2.0);
    CHECK(ess_from_moments(0.2, 0.016) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(ess_from_moments(0.3, 0.21) == 0.0);
    CHECK_THROWS_AS(ess_from_moments(0, 0.1), std::domain_error);
    CHECK_THROWS_AS(ess_from_moments(0.5, 0), std::domain_error);
  }

  TEST_CASE("scaling, cap and rounding") {
    CHECK(adjust_ess(9, 1.0, 6).s == 6);
    CHECK(adjust_ess(9, 1.0, 6).value == 6.0);
    CHECK(adjust_ess(9, 0.5, 6).value == 4.5);
    CHECK(adjust_ess(9, 0.5, 6).s == 5);
    CHECK(adjust_ess(0, 0.3, 12).s == 0);
    CHECK(adjust_ess(3.49, 1.0, 12).s == 3);
    CHECK_THROWS_AS(adjust_ess(3, 0, 12), std::domain_error);
    CHECK_THROWS_AS(adjust_ess(3, 1.5, 12), std::domain_error);
  }

  TEST_CASE("fixed-case bundle") {
    const DoseGrid grid{{300, 900, 1500, 2100, 2400}, 2400, 3};
    const DoseData data{{3, 0, 0}, {3, 0, 0}, {6, 1, 0}, {0, 0, 0}, {6, 3, 3}};
    const auto b = build_skeleton_bundle(grid, data, 3, SkeletonConfig{}, true);
    CHECK(b.cap == 6);
    CHECK(b.r > 0);
    CHECK(b.r < 1);
    CHECK(b.adj_T.s <= 6);
    CHECK(b.adj_E.s <= 6);
    REQUIRE(b.v.has_value());
    REQUIRE(b.fp_powers.has_value());
    CHECK(b.provenance.count("r") == 1);
    const auto o = oracle::blrm_dense(
        {{300, 3, 0}, {900, 3, 0}, {1500, 6, 1}, {2400, 6, 3}}, 2400, 2100, logit(0.3), 2, 0, 1);
    CHECK(std::fabs(b.mu_T - static_cast<double>(o.mu)) < 1e-3);
  }
}
