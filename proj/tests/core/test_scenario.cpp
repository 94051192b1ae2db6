#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doseins/scenario.hpp"
#include "oracles.hpp"

using namespace doseins;

namespace {

// The generator written again from the recipe: uniforms from the same stream,
// long double transforms.
std::vector<oracle::real> toxicity_oracle(RngStream rng, const RandomGenParams& prm, std::size_t* pivot) {
  using oracle::norm_cdf;
  auto z = [](oracle::real p) {
    p = std::clamp<oracle::real>(p, 1e-12L, 1 - 1e-12L);
    return oracle::norm_quantile(p);
  };
  auto normal = [&](oracle::real m, oracle::real s) { return m + s * oracle::norm_quantile(rng.uniform()); };
  const int j = rng.uniform_int(1, 3);
  *pivot = static_cast<std::size_t>(j);
  const oracle::real zphi = oracle::norm_quantile(prm.phi);
  const oracle::real ej = normal(zphi, prm.sigma0);
  const oracle::real elo = normal(prm.mu1, prm.sigma1);
  const oracle::real ehi = normal(prm.mu2, prm.sigma2);
  const oracle::real mirror = z(2 * prm.phi - norm_cdf(ej));
  std::vector<oracle::real> p(5);
  p[j] = norm_cdf(ej);
  p[j - 1] = norm_cdf(ej - (ej > zphi ? ej - mirror : 0) - elo * elo);
  p[j + 1] = norm_cdf(ej + (ej < zphi ? mirror - ej : 0) + ehi * ehi);
  for (int k = j - 2; k >= 0; --k) {
    const oracle::real e = normal(prm.mu1, prm.sigma1);
    p[k] = norm_cdf(z(p[k + 1]) - e * e);
  }
  for (int k = j + 2; k < 5; ++k) {
    const oracle::real e = normal(prm.mu2, prm.sigma2);
    p[k] = norm_cdf(z(p[k - 1]) + e * e);
  }
  return p;
}

bool has_valley(const std::vector<double>& q) {
  // A strict drop followed later by a strict rise, plateaus allowed in between.
  bool fell = false;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] < q[i - 1]) fell = true;
    if (q[i] > q[i - 1] && fell) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("fixed table") {
    const auto all = fixed_scenarios();
    CHECK(all.size() == 9);
    const auto t2 = fixed_scenario("T2");
    CHECK(t2.truth.label == "T2E1");
    CHECK(t2.truth.p == std::vector<double>{0.05, 0.10, 0.15, 0.30, 0.60});
    CHECK(t2.trial_grid.doses == std::vector<double>{300, 900, 1500, 2400});
    CHECK(t2.d_star == 2100);
    std::vector<int> dlt;
    for (const auto& c : t2.history) dlt.push_back(c.t);
    CHECK(dlt == std::vector<int>{0, 0, 1, 3});
    CHECK(fixed_scenario("T1").truth.true_mtd == 3u);
    CHECK(fixed_scenario("T2").truth.true_mtd == 3u);
    CHECK(fixed_scenario("T3").truth.true_mtd == 2u);
    CHECK_THROWS_AS(fixed_scenario("T4"), std::invalid_argument);
  }

  TEST_CASE("true MTD and OBD operators") {
    CHECK(true_mtd({0.2, 0.4}, 0.3) == 1u);
    CHECK(true_mtd({0.1, 0.25, 0.5}, 0.3) == 1u);
    CHECK(true_obd({0.1, 0.2, 0.5}, {0.3, 0.6, 0.9}, 0.3) == 1u);
    CHECK(true_obd({0.1, 0.2, 0.5}, {0.6, 0.6, 0.9}, 0.3) == 0u);
    CHECK_FALSE(true_obd({0.4, 0.5}, {0.6, 0.7}, 0.3));
  }

  TEST_CASE("noise-free toxicity collapses to phi everywhere") {
    RandomGenParams p = RandomGenParams::for_target(0.3);
    p.sigma0 = p.sigma1 = p.sigma2 = 0;
    p.mu1 = p.mu2 = 0;
    RngStream rng(1, 0);
    const auto t = random_toxicity(rng, p);
    for (double x : t.p) CHECK(x == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("toxicity matches an independent implementation") {
    const auto prm = RandomGenParams::for_target(0.3);
    for (std::uint64_t seed : {1u, 2u, 3u, 20240101u, 777u}) {
      for (std::uint64_t stream = 0; stream < 40; ++stream) {
        RngStream rng(seed, stream);
        std::size_t pivot = 0;
        const auto want = toxicity_oracle(rng, prm, &pivot);
        const auto got = random_toxicity(rng, prm);
        CHECK(got.pivot == pivot);
        for (int k = 0; k < 5; ++k) CHECK(std::fabs(got.p[k] - static_cast<double>(want[k])) < 1e-12);
      }
    }
  }

  TEST_CASE("toxicity is nondecreasing and the pivot centres on phi") {
    const auto prm = RandomGenParams::for_target(0.3);
    RngStream rng(4242, 0);
    const int draws = 10000;
    double s = 0, s2 = 0;
    for (int i = 0; i < draws; ++i) {
      const auto t = random_toxicity(rng, prm);
      for (int k = 1; k < 5; ++k) CHECK(t.p[k] >= t.p[k - 1]);
      CHECK((t.pivot >= 1 && t.pivot <= 3));
      s += t.p[t.pivot];
      s2 += t.p[t.pivot] * t.p[t.pivot];
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 / draws - mean * mean) / draws);
    CHECK(std::fabs(mean - 0.3) < 3 * se);
  }

  TEST_CASE("inserted-dose truth") {
    RngStream rng(1, 1);
    CHECK(std::fabs(inserted_dose_truth(rng, 0.15, 0.50, 0) - 0.569460183207674) < 1e-9);
    CHECK(std::fabs(inserted_dose_truth(rng, 0.3 - 1e-9, 0.3, 0) - 0.5) < 1e-6);
    const double z = inserted_dose_truth(rng, 0.15, 0.50, 0, InsertedTruthMode::kZMidpoint);
    CHECK(std::fabs(z - 0.302153543984805) < 1e-9);
    CHECK(z > 0.15);
    CHECK(z < 0.50);
    CHECK_THROWS_AS(inserted_dose_truth(rng, 0.5, 0.2, 0), std::domain_error);
  }

  TEST_CASE("monotone efficacy") {
    auto prm = RandomGenParams::for_target(0.3);
    RngStream rng(5, 0);
    for (int i = 0; i < 2000; ++i) {
      const auto q = random_efficacy(rng, prm);
      for (int k = 1; k < 5; ++k) CHECK(q[k] >= q[k - 1]);
      const bool anchored = std::any_of(q.begin(), q.end(), [&](double x) { return x >= prm.delta1; });
      CHECK(anchored);
      for (double x : q) CHECK(x <= prm.q_max);
    }
    prm.delta1 = prm.q_max;
    const auto flat = random_efficacy(rng, prm);
    const auto top = std::max_element(flat.begin(), flat.end());
    for (auto it = top; it != flat.end(); ++it) CHECK(*it == doctest::Approx(prm.q_max));
  }

  TEST_CASE("unimodal efficacy has no interior valley") {
    auto prm = RandomGenParams::for_target(0.3);
    prm.shape = EfficacyShape::kUnimodal;
    RngStream rng(6, 0);
    for (int i = 0; i < 5000; ++i) {
      const auto q = random_efficacy(rng, prm);
      CHECK_FALSE(has_valley(q));
      CHECK(*std::max_element(q.begin(), q.end()) >= prm.delta1);
    }
  }

  TEST_CASE("scenarios are reproducible and the trial grid drops the pivot") {
    const auto prm = RandomGenParams::for_target(0.3);
    RngStream a(9, 9), b(9, 9);
    const auto sa = random_scenario(a, prm);
    const auto sb = random_scenario(b, prm);
    CHECK(sa.toxicity.p == sb.toxicity.p);
    CHECK(sa.q == sb.q);
    const auto g = sa.trial_grid();
    CHECK(g.doses.size() == 4);
    CHECK(std::find(g.doses.begin(), g.doses.end(), sa.doses[sa.toxicity.pivot]) == g.doses.end());
    CHECK(g.d_ref == g.doses.back());
    CHECK(sa.trial_p().size() == 4);
  }

  TEST_CASE("parameter validation and names") {
    auto prm = RandomGenParams::for_target(0.3);
    CHECK(prm.mu1 == doctest::Approx(-0.2));
    CHECK(prm.mu2 == doctest::Approx(0.8));
    prm.q_max = 0.4;
    CHECK_THROWS_AS(prm.validate(), std::domain_error);
    CHECK(parse_efficacy_shape(to_string(EfficacyShape::kUnimodal)) == EfficacyShape::kUnimodal);
    CHECK(parse_inserted_truth_mode("z-midpoint") == InsertedTruthMode::kZMidpoint);
    CHECK_THROWS_AS(parse_efficacy_shape("flat"), std::invalid_argument);
  }
}
