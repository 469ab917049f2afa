#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grasslab/estimators.hpp"
#include "support/oracles.hpp"

using namespace grasslab::estimators;
using grasslab::EstimateWithCI;
using grasslab::RngStream;
using grasslab::grassmann::Subspace;
namespace measures = grasslab::measures;
namespace geometry = grasslab::geometry;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

EstimatorBudget small_budget() {
  EstimatorBudget b;
  b.n_samples = 30000;
  b.n_directions = 256;
  return b;
}

}  // namespace

TEST_CASE("density-route isotropic constants hit the closed forms") {
  const EstimatorBudget budget = small_budget();
  SUBCASE("gaussian, any dimension") {
    for (int n : {2, 5}) {
      RngStream rng(1);
      const auto est =
          isotropic_constant_density(measures::gaussian(n), budget, rng);
      CHECK(est.value ==
            doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-6));
      CHECK(est.se == 0.0);  // exact covariance
    }
  }
  SUBCASE("cube") {
    RngStream rng(2);
    const auto est =
        isotropic_constant_density(measures::cube(4), budget, rng);
    CHECK(est.value ==
          doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(1e-6));
  }
  SUBCASE("scaling invariance under lambda identity") {
    RngStream r1(3), r2(3);
    const auto base =
        isotropic_constant_density(measures::gaussian(3), budget, r1);
    const Matrix map = 2.0 * Matrix::Identity(3, 3);
    const auto scaled = isotropic_constant_density(
        measures::linear_pushforward(measures::gaussian(3), map,
                                     Vector::Zero(3)),
        budget, r2);
    CHECK(std::abs(base.value - scaled.value) < 1e-9);
  }
  SUBCASE("every builtin clears the universal lower bound") {
    for (const char* name :
         {"gaussian", "cube", "lp1", "lp2", "simplex", "laplace_product"}) {
      CAPTURE(name);
      RngStream rng(4);
      const auto est = isotropic_constant_density(
          measures::builtin(name, 4), budget, rng);
      CHECK(est.value > 0.05);
    }
  }
}

TEST_CASE("volumetric isotropic constants") {
  EstimatorBudget budget;
  budget.n_samples = 120000;
  budget.n_directions = 1024;
  SUBCASE("gaussian(2) brackets pi^{-1/2}") {
    RngStream rng(5);
    const auto est =
        isotropic_constant_volumetric(measures::gaussian(2), budget, rng);
    const double truth = 1.0 / std::sqrt(M_PI);
    CHECK(est.lo <= truth);
    CHECK(est.hi >= truth);
    CHECK((est.hi - est.lo) / truth < 0.05);
    CHECK(truth == doctest::Approx(0.5642).epsilon(1e-3));
  }
  SUBCASE("gaussian(1) brackets the two-sided mean-width value") {
    RngStream rng(6);
    const auto est =
        isotropic_constant_volumetric(measures::gaussian(1), budget, rng);
    const double truth = 1.0 / (2.0 * std::sqrt(2.0 / M_PI));
    CHECK(truth == doctest::Approx(0.6267).epsilon(1e-3));
    CHECK(est.lo <= truth * 1.001);
    CHECK(est.hi >= truth * 0.999);
  }
  SUBCASE("volumetric and density routes stay within a bounded factor") {
    for (const char* name : {"gaussian", "cube", "lp1"}) {
      CAPTURE(name);
      const auto mu = measures::builtin(name, 3);
      RngStream r1(7), r2(8);
      const auto vol = isotropic_constant_volumetric(mu, budget, r1);
      const auto den = isotropic_constant_density(mu, small_budget(), r2);
      const double ratio = vol.value / den.value;
      CHECK(ratio > 0.5);
      CHECK(ratio < 3.0);
    }
  }
}

TEST_CASE("marginal isotropic constants") {
  const EstimatorBudget budget = small_budget();
  SUBCASE("gaussian marginals keep the gaussian constant") {
    RngStream frng(9);
    const Subspace f = grasslab::grassmann::haar_sample(5, 2, frng);
    RngStream rng(10);
    const auto est = marginal_L(measures::gaussian(5), f, LMethod::kDensity,
                                budget, rng);
    CHECK(est.value ==
          doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-3));
  }
  SUBCASE("gaussian-factor marginal of a product") {
    const auto mu = measures::product(measures::cube(2),
                                      measures::gaussian(2));
    Matrix frame = Matrix::Zero(4, 2);
    frame(2, 0) = 1.0;
    frame(3, 1) = 1.0;
    RngStream rng(11);
    const auto est = marginal_L(mu, Subspace(4, frame), LMethod::kDensity,
                                budget, rng);
    CHECK(std::abs(est.value - 1.0 / std::sqrt(2 * M_PI)) <=
          4 * est.se + 5e-3);
  }
  SUBCASE("diagonal marginal of the square, both routes") {
    Matrix f(2, 1);
    f << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const Subspace diag(2, f);
    RngStream r1(12), r2(13);
    EstimatorBudget big = budget;
    big.n_samples = 150000;
    big.n_directions = 64;
    const auto den = marginal_L(measures::cube(2), diag, LMethod::kDensity,
                                big, r1);
    const auto vol = marginal_L(measures::cube(2), diag,
                                LMethod::kVolumetric, big, r2);
    // Exact values from the convolution oracle: f(0) = 1/sqrt(6) and
    // |Z_1| = 2 E|X| with E|X| = 2/sqrt(6).
    CHECK(den.value == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-6));
    const double expected_vol = 1.0 / (4.0 / std::sqrt(6.0));
    CHECK(vol.lo <= expected_vol * 1.02);
    CHECK(vol.hi >= expected_vol * 0.98);
    // Route agreement up to the sup/center factor e plus CI slack.
    const double ratio = vol.value / den.value;
    CHECK(ratio <= std::exp(1.0) * 1.05);
    CHECK(ratio >= 1.0 / 1.05);
  }
}

TEST_CASE("Haar averages of fiber densities") {
  SUBCASE("gaussian gives the constant for every k") {
    for (int k : {1, 2}) {
      RngStream rng(14);
      const auto est =
          a_k_average(measures::gaussian(4), k, 120, 20000, rng);
      CHECK(std::abs(est.value - 1.0 / std::sqrt(2 * M_PI)) <=
            4 * est.se + 2e-3);
    }
  }
  SUBCASE("relation to the affine quermassintegral of Z_k") {
    const auto mu = measures::cube(4);
    RngStream rng(15);
    const auto a_k = a_k_average(mu, 1, 150, 40000, rng);
    const auto z1 = geometry::zq_body(mu, 1.0, 40000, RngStream(16));
    RngStream qr(17);
    const auto phi = affine_quermassintegral(z1, 1, 150, qr);
    const double prod = a_k.value * phi.value;
    CHECK(prod > 1.0 / 8.0);
    CHECK(prod < 8.0);
  }
  SUBCASE("upper bound shape against the Z_k volume radius") {
    const auto mu = measures::cube(4);
    RngStream rng(18);
    const auto a_k = a_k_average(mu, 1, 150, 40000, rng);
    const auto z1 = geometry::zq_body(mu, 1.0, 60000, RngStream(19));
    const auto vb = geometry::volume_sandwich(z1, 512, RngStream(20));
    const double vr = std::pow(vb.upper, 0.25);
    const double implied_c = a_k.value * vr / std::sqrt(1.0 / 4.0);
    CHECK(implied_c > 0.0);
    CHECK(implied_c < 10.0);
  }
}

TEST_CASE("affine quermassintegrals") {
  SUBCASE("ball projections are constant") {
    RngStream rng(21);
    const auto est = affine_quermassintegral(
        geometry::ConvexBody::ball(3, 1.0), 1, 200, rng);
    CHECK(est.value == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("homogeneity of order one") {
    const auto cube = geometry::ConvexBody::cube(4, 1.0);
    const auto cube2 = geometry::ConvexBody::cube(4, 2.0);
    RngStream r1(22), r2(22);
    const auto a = affine_quermassintegral(cube, 2, 100, r1);
    const auto b = affine_quermassintegral(cube2, 2, 100, r2);
    CHECK(b.value == doctest::Approx(2.0 * a.value).epsilon(1e-9));
  }
  SUBCASE("lower bound with the tested constant") {
    for (int n : {4, 6}) {
      for (int k : {1, 2}) {
        CAPTURE(n);
        CAPTURE(k);
        const auto cube = geometry::ConvexBody::cube(n, 1.0);
        const auto cross = geometry::ConvexBody::cross_polytope(n, 1.0);
        for (const auto* body : {&cube, &cross}) {
          RngStream rng(23 + n + k);
          const auto est = affine_quermassintegral(*body, k, 150, rng);
          const double floor = 0.1 *
                               std::pow(*body->exact_volume(), 1.0 / n) *
                               std::sqrt(static_cast<double>(n) / k);
          CHECK(est.value >= floor);
        }
      }
    }
  }
}

TEST_CASE("dual affine quermassintegrals") {
  SUBCASE("ball sections are constant") {
    RngStream rng(30);
    const auto est = dual_affine_quermassintegral(
        geometry::ConvexBody::ball(3, 1.0), 1, 200, rng);
    CHECK(est.value == doctest::Approx(M_PI).epsilon(1e-9));
  }
  SUBCASE("volume-normalized cube sits below the ball") {
    // Grinberg's inequality at (4, 1).
    const auto cube = geometry::ConvexBody::cube(4, 0.5);
    const double rn = std::pow(oracles::unit_ball_volume(4), -0.25);
    const auto ball = geometry::ConvexBody::ball(4, rn);
    RngStream r1(31), r2(32);
    const auto qc = dual_affine_quermassintegral(cube, 1, 400, r1);
    const auto qb = dual_affine_quermassintegral(ball, 1, 400, r2);
    CHECK(qc.value <= qb.value * (1 + 3 * (qc.se + qb.se)));
  }
  SUBCASE("invariance under a volume-preserving shear") {
    const auto cube = geometry::ConvexBody::cube(4, 1.0);
    Matrix shear = Matrix::Identity(4, 4);
    shear(0, 1) = 0.6;
    grasslab::lowdim::Halfspaces h = *cube.hrep();
    h.a = h.a * shear.inverse();
    const auto sheared =
        geometry::ConvexBody::from_halfspaces(h, true);
    RngStream r1(33), r2(34);
    const auto a = dual_affine_quermassintegral(cube, 1, 500, r1);
    const auto b = dual_affine_quermassintegral(sheared, 1, 500, r2);
    CHECK(std::abs(a.value - b.value) <=
          3 * std::hypot(a.se, b.se) + 0.01 * a.value);
  }
}

TEST_CASE("q_v scans") {
  EstimatorBudget budget;
  budget.n_samples = 40000;
  budget.n_directions = 512;
  SUBCASE("gaussian reaches q_v = n at beta = 2") {
    RngStream rng(35);
    const auto result = qv_estimate(measures::gaussian(4), 2.0, budget, rng);
    CHECK(result.q_v == 4);
    // Closed-form oracle for the volume radius at each q.
    for (const auto& row : result.profile) {
      const double radius =
          std::pow(oracles::gaussian_abs_moment(row.q), 1.0 / row.q);
      const double truth =
          std::pow(oracles::unit_ball_volume(4), 0.25) * radius;
      CHECK(row.vr_lower <= truth * 1.001);
      CHECK(row.vr_upper >= truth * 0.999);
    }
  }
  SUBCASE("monotone in beta") {
    RngStream r1(36), r2(36);
    const auto tight = qv_estimate(measures::cube(3), 1.0, budget, r1);
    const auto loose = qv_estimate(measures::cube(3), 3.0, budget, r2);
    CHECK(tight.q_v <= loose.q_v);
  }
}

TEST_CASE("norm moments") {
  SUBCASE("gaussian I_2 is sqrt(n)") {
    for (int n : {3, 6}) {
      RngStream rng(37);
      const auto est = iq_moment(measures::gaussian(n), 2.0, 60000, rng);
      CHECK(std::abs(est.value - std::sqrt(static_cast<double>(n))) <=
            4 * est.se);
    }
  }
  SUBCASE("negative moment against the chi quadrature oracle") {
    RngStream rng(38);
    const auto est = iq_moment(measures::gaussian(4), -1.0, 200000, rng);
    const double truth = 1.0 / oracles::chi_moment(4, -1.0);
    CHECK(std::abs(est.value - truth) <= 5 * est.se + 2e-3);
    CHECK(truth == doctest::Approx(1.0 / 0.62666).epsilon(1e-3));
  }
  SUBCASE("power-mean monotonicity") {
    RngStream r1(39), r2(39);
    const auto low = iq_moment(measures::cube(4), 1.0, 60000, r1);
    const auto high = iq_moment(measures::cube(4), 3.0, 60000, r2);
    CHECK(low.value <= high.value * (1 + 3 * (low.se + high.se)));
  }
  SUBCASE("variance guard") {
    RngStream rng(40);
    CHECK_THROWS_AS((void)iq_moment(measures::gaussian(4), -2.0, 1000, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("q_{-c} estimates") {
  SUBCASE("huge delta returns the cap") {
    RngStream rng(41);
    const auto p =
        q_minus_c_estimate(measures::gaussian(6), 100.0, 40000, rng);
    REQUIRE(p.has_value());
    CHECK(*p == doctest::Approx(2.5));
  }
  SUBCASE("gaussian(8) at delta = 2 saturates the guard cap") {
    // chi-moment oracle: even at the cap p = 3.5 the negative moment stays
    // above I_2 / 2, so the certified answer is the cap.
    const double cap_moment = std::pow(oracles::chi_moment(8, -3.5), -1.0 / 3.5);
    CHECK(cap_moment > std::sqrt(8.0) / 2.0);
    RngStream rng(42);
    const auto p = q_minus_c_estimate(measures::gaussian(8), 2.0, 60000, rng);
    REQUIRE(p.has_value());
    CHECK(*p == doctest::Approx(3.5));
  }
  SUBCASE("monotone in delta") {
    RngStream r1(43), r2(43);
    const auto tight =
        q_minus_c_estimate(measures::lp_ball(1, 6), 1.3, 60000, r1);
    const auto loose =
        q_minus_c_estimate(measures::lp_ball(1, 6), 4.0, 60000, r2);
    REQUIRE(tight.has_value());
    REQUIRE(loose.has_value());
    CHECK(*tight <= *loose + 1e-9);
  }
}
