#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grasslab/search.hpp"
#include "support/oracles.hpp"

using namespace grasslab::search;
using grasslab::RngStream;
namespace measures = grasslab::measures;
namespace geometry = grasslab::geometry;
namespace grassmann = grasslab::grassmann;
using Matrix = Eigen::MatrixXd;

namespace {

SearchConfig base_config() {
  SearchConfig cfg;
  cfg.epsilon = 0.3;
  cfg.accept_constant = 10.0;
  cfg.max_trials = 50;
  cfg.seed = 4242;
  cfg.budget.n_samples = 20000;
  return cfg;
}

}  // namespace

TEST_CASE("threshold shape") {
  SearchConfig cfg = base_config();
  CHECK(cfg.threshold(8, 1) ==
        doctest::Approx(10.0 / std::pow(0.3, 7.0 / 8.0)));
  cfg.beta = 2.0;
  CHECK(cfg.threshold(8, 1) ==
        doctest::Approx(20.0 / std::pow(0.3, 7.0 / 8.0)));
}

TEST_CASE("gaussian searches accept immediately") {
  const auto mu = measures::gaussian(6);
  const auto center = Subspace::coordinate(6, 2);
  const SearchConfig cfg = base_config();
  const auto result = neighborhood_search(mu, center, cfg);
  REQUIRE(result.accepted.has_value());
  CHECK(result.trials.front().accepted);
  CHECK(result.l_estimate.value ==
        doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-2));
  CHECK(result.distance < cfg.epsilon);
}

TEST_CASE("cube(8) line searches satisfy the recorded contract") {
  const auto mu = measures::cube(8);
  const auto center = Subspace::coordinate(8, 1);
  const SearchConfig cfg = base_config();
  const auto result = neighborhood_search(mu, center, cfg);
  REQUIRE(result.accepted.has_value());
  CHECK(result.distance < cfg.epsilon);
  CHECK(result.l_estimate.value + 2 * result.l_estimate.se <
        result.threshold);
  CHECK(grassmann::metric_value(cfg.metric, center, *result.accepted) ==
        doctest::Approx(result.distance));
  // Self-consistency is machine-checkable from the log alone.
  for (const auto& t : result.trials) {
    if (t.accepted) {
      CHECK(t.distance < cfg.epsilon);
      CHECK(t.l_value + 2 * t.l_se < result.threshold);
    }
  }
}

TEST_CASE("trial logs are reproducible and worker-count independent") {
  const auto mu = measures::cube(6);
  const auto center = Subspace::coordinate(6, 1);
  SearchConfig cfg = base_config();
  cfg.max_trials = 16;
  cfg.workers = 1;
  const auto a = neighborhood_search(mu, center, cfg);
  cfg.workers = 4;
  const auto b = neighborhood_search(mu, center, cfg);
  REQUIRE(a.trials.size() == b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].subspace_digest == b.trials[i].subspace_digest);
    CHECK(a.trials[i].l_value == b.trials[i].l_value);
    CHECK(a.trials[i].distance == b.trials[i].distance);
    CHECK(a.trials[i].accepted == b.trials[i].accepted);
  }
  const auto c = neighborhood_search(mu, center, cfg);
  CHECK(c.trials.front().subspace_digest == a.trials.front().subspace_digest);
}

TEST_CASE("epsilon at the diameter degenerates to a Haar search") {
  const auto mu = measures::cube(5);
  const auto center = Subspace::coordinate(5, 2);
  SearchConfig cfg = base_config();
  cfg.epsilon = grassmann::metric_diameter(cfg.metric) + 0.1;
  const auto result = neighborhood_search(mu, center, cfg);
  REQUIRE(result.accepted.has_value());
  // Unconstrained trials may land anywhere on the Grassmannian.
  CHECK(result.l_estimate.value + 2 * result.l_estimate.se <
        result.threshold);
}

TEST_CASE("best-of-budget returns the smallest accepted constant") {
  const auto mu = measures::cube(6);
  const auto center = Subspace::coordinate(6, 1);
  SearchConfig cfg = base_config();
  cfg.max_trials = 12;
  cfg.best_of_budget = true;
  const auto result = neighborhood_search(mu, center, cfg);
  REQUIRE(result.accepted.has_value());
  CHECK(result.trials.size() == 12);
  for (const auto& t : result.trials)
    if (t.accepted) CHECK(result.l_estimate.value <= t.l_value + 1e-15);
}

TEST_CASE("deviation profiles") {
  SUBCASE("gaussian tails vanish immediately past one") {
    const auto prof = deviation_profile(
        measures::gaussian(6), 2, {1.05, 1.5, 2.0}, 60, LMethod::kDensity,
        EstimatorBudget{20000, 128, 10}, 99);
    for (const auto& row : prof.rows) CHECK(row.tail == 0.0);
  }
  SUBCASE("cube tails are monotone nonincreasing with binomial bands") {
    const auto prof = deviation_profile(
        measures::cube(8), 1, {1.01, 1.05, 1.25, 2.0}, 120,
        LMethod::kDensity, EstimatorBudget{40000, 128, 10}, 100);
    for (std::size_t i = 1; i < prof.rows.size(); ++i)
      CHECK(prof.rows[i].tail <= prof.rows[i - 1].tail + 1e-12);
    CHECK(prof.rows.back().tail == 0.0);
    for (const auto& row : prof.rows) {
      CHECK(row.ci_lo <= row.tail);
      CHECK(row.ci_hi >= row.tail);
    }
  }
}

TEST_CASE("stability checks") {
  EstimatorBudget budget;
  budget.n_samples = 15000;
  budget.n_directions = 128;
  SUBCASE("identical subspaces give ratio one exactly") {
    const auto body = geometry::ConvexBody::cube(6, 1.0);
    RngStream rng(1);
    const auto f = grassmann::haar_sample(6, 2, rng);
    const double v1 = geometry::volume_exact(geometry::project_body(body, f));
    const double v2 = geometry::volume_exact(geometry::project_body(body, f));
    CHECK(v1 == v2);
  }
  SUBCASE("cube support polytope sandwich holds on random pairs") {
    const auto rep = stability_check(measures::cube(6), 2, 40, budget, 7);
    CHECK(rep.body_violations == 0);
    CHECK(rep.body_radius_ratio == doctest::Approx(std::sqrt(6.0)));
    for (const auto& p : rep.pairs) {
      if (p.body_bound > 0) CHECK(p.body_ratio <= p.body_bound * (1 + 1e-9));
    }
  }
  SUBCASE("gaussian marginal constants are flat") {
    const auto rep = stability_check(measures::gaussian(5), 2, 12, budget, 8);
    CHECK(rep.l_violations == 0);
    for (const auto& p : rep.pairs)
      if (p.l_ratio > 0) CHECK(p.l_ratio < 1.3);
  }
}

TEST_CASE("sharpness demo") {
  EstimatorBudget budget;
  budget.n_samples = 50000;
  SUBCASE("gaussian base collapses to the gaussian constant") {
    const auto rep =
        sharpness_demo(measures::gaussian(4), 0.5, 8, 10, budget, 11);
    CHECK(rep.l_base.value ==
          doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-6));
    CHECK(rep.l_product.value ==
          doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-6));
    CHECK(rep.lifted_below_base);
    CHECK(std::abs(rep.l_coordinate_marginal.value - rep.l_base.value) <
          0.01);
  }
  SUBCASE("cube base satisfies the product inequality") {
    const auto rep =
        sharpness_demo(measures::cube(4), 0.5, 8, 15, budget, 12);
    // Closed forms: L_base = 12^{-1/2}; L_nu = (144 (2 pi)^2)^{-1/8}.
    CHECK(rep.l_base.value == doctest::Approx(0.288675).epsilon(1e-4));
    CHECK(rep.l_product.value == doctest::Approx(0.33935).epsilon(1e-3));
    CHECK(rep.lifted_value ==
          doctest::Approx(std::pow(rep.l_product.value / std::exp(1.0), 2.0)));
    CHECK(rep.lifted_below_base);
    CHECK(std::abs(rep.l_coordinate_marginal.value - rep.l_base.value) <=
          4 * rep.l_coordinate_marginal.se + 0.01);
    CHECK(rep.max_marginal_l > 0.0);
    CHECK(rep.implied_constant > 0.0);
  }
  SUBCASE("invalid lambda is rejected") {
    CHECK_THROWS_AS(
        (void)sharpness_demo(measures::cube(3), 0.4, 8, 5, budget, 13),
        std::invalid_argument);
  }
}
