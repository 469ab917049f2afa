#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grasslab/measures.hpp"
#include "grasslab/stats.hpp"
#include "support/oracles.hpp"

using namespace grasslab::measures;
using grasslab::RngStream;
using grasslab::grassmann::Subspace;
namespace stats = grasslab::stats;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

const char* kBuiltinNames[] = {"gaussian", "cube",    "lp1",
                               "lp2",      "simplex", "laplace_product"};

Subspace diagonal_line2() {
  Matrix f(2, 1);
  f << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return Subspace(2, f);
}

}  // namespace

TEST_CASE("builtin densities at the origin") {
  const Measure g4 = gaussian(4);
  CHECK(g4.density(Vector::Zero(4)) ==
        doctest::Approx(std::pow(2 * M_PI, -2.0)));
  const Measure c3 = cube(3);
  CHECK(c3.density(Vector::Zero(3)) ==
        doctest::Approx(std::pow(2 * std::sqrt(3.0), -3.0)));
  CHECK(c3.density(Vector::Constant(3, 2.0)) == 0.0);
}

TEST_CASE("builtins are centered isotropic within Monte Carlo error") {
  for (const char* name : kBuiltinNames) {
    CAPTURE(name);
    const Measure mu = builtin(name, 3);
    RngStream rng(17);
    const auto est = covariance_estimate(mu, 100000, rng);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double target = i == j ? 1.0 : 0.0;
        CHECK(std::abs(est.cov(i, j) - target) <= 5 * est.se(i, j) + 1e-9);
      }
  }
}

TEST_CASE("builtin densities integrate to one") {
  for (const char* name : {"cube", "lp1", "lp2", "simplex"}) {
    CAPTURE(name);
    const Measure mu = builtin(name, 2);
    const double rho = *mu.support_radius();
    const int g = 400;
    double acc = 0.0;
    const double h = 2 * rho / g;
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) {
        Vector x(2);
        x << -rho + (i + 0.5) * h, -rho + (j + 0.5) * h;
        acc += mu.density(x) * h * h;
      }
    CHECK(acc == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("log-concavity along sampled segments") {
  RngStream rng(21);
  for (const char* name : kBuiltinNames) {
    CAPTURE(name);
    const Measure mu = builtin(name, 3);
    for (int i = 0; i < 200; ++i) {
      const Vector a = mu.sample(rng);
      const Vector b = mu.sample(rng);
      const double fa = mu.density(a), fb = mu.density(b);
      const double fm = mu.density(0.5 * (a + b));
      CHECK(fm * fm >= fa * fb - 1e-12);
    }
  }
}

TEST_CASE("product measure") {
  const Measure g2 = gaussian(2), g3 = gaussian(3);
  const Measure prod = product(g2, g3);
  SUBCASE("gaussian times gaussian is gaussian, pointwise") {
    const Measure g5 = gaussian(5);
    RngStream rng(1);
    for (int i = 0; i < 50; ++i) {
      Vector x(5);
      for (int j = 0; j < 5; ++j) x(j) = rng.normal();
      CHECK(prod.log_density(x) == doctest::Approx(g5.log_density(x)));
    }
  }
  SUBCASE("covariance is block diagonal") {
    const Measure mixed = product(cube(2), gaussian(2));
    const Matrix cov = *mixed.covariance();
    CHECK((cov - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("coordinate marginal of the product recovers the factor") {
    const Measure mixed = product(cube(1), gaussian(2));
    const Subspace first = Subspace::coordinate(3, 1);
    const Measure marg = marginal(mixed, first);
    RngStream rng(2);
    std::vector<double> from_marg, from_factor;
    const Measure factor = cube(1);
    for (int i = 0; i < 3000; ++i) {
      from_marg.push_back(marg.sample(rng)(0));
      from_factor.push_back(factor.sample(rng)(0));
    }
    CHECK(stats::ks_test_two_sample(from_marg, from_factor) > 0.01);
  }
}

TEST_CASE("gaussian smoothing endpoints collapse") {
  const Measure base = cube(2);
  CHECK(gaussian_smoothing(base, 0.0).descriptor().to_string() ==
        base.descriptor().to_string());
  CHECK(gaussian_smoothing(base, 1.0).descriptor().to_string() ==
        gaussian(2).descriptor().to_string());
  CHECK_THROWS_AS((void)gaussian_smoothing(base, 1.5), std::invalid_argument);
}

TEST_CASE("smoothed gaussian stays gaussian (quadrature of the formula)") {
  for (int k : {1, 2}) {
    CAPTURE(k);
    const Measure mu = gaussian_smoothing(gaussian(k), 0.6);
    const Measure ref = gaussian(k);
    RngStream rng(3);
    for (int i = 0; i < 8; ++i) {
      Vector x(k);
      for (int j = 0; j < k; ++j) x(j) = rng.uniform(-2.0, 2.0);
      CHECK(mu.log_density(x) ==
            doctest::Approx(ref.log_density(x)).epsilon(1e-5));
    }
  }
}

TEST_CASE("smoothed density formula matches the direct convolution route") {
  // Independent oracle: the law of sqrt(1-xi^2) U + xi G has density
  // E_U[(1/xi) g((x - sqrt(1-xi^2) U)/xi)], integrated over the base
  // variable directly rather than over the kernel variable.
  const double xi = 0.55;
  const Measure mu = gaussian_smoothing(cube(1), xi);
  const double root = std::sqrt(1.0 - xi * xi);
  const double a = std::sqrt(3.0);
  for (double x : {-1.5, -0.4, 0.0, 0.7, 2.2}) {
    const double direct = oracles::simpson(
        [&](double u) {
          const double z = (x - root * u) / xi;
          return (1.0 / (2.0 * a)) * std::exp(-0.5 * z * z) /
                 (xi * std::sqrt(2.0 * M_PI));
        },
        -a, a, 2000);
    Vector xv(1);
    xv << x;
    CHECK(mu.density(xv) == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("smoothed sampler matches the integral-formula CDF at k = 1") {
  const double xi = 0.45;
  const Measure mu = gaussian_smoothing(lp_ball(1, 1), xi);
  std::vector<double> cdf;
  double acc = 0.0;
  const double lo = -8.0, hi = 8.0;
  const int g = 600;
  const double h = (hi - lo) / g;
  double prev = 0.0;
  for (int i = 0; i <= g; ++i) {
    Vector x(1);
    x << lo + i * h;
    const double f = mu.density(x);
    if (i > 0) acc += 0.5 * (prev + f) * h;
    prev = f;
    cdf.push_back(acc);
  }
  for (auto& c : cdf) c /= acc;
  auto cdf_at = [&](double t) {
    if (t <= lo) return 0.0;
    if (t >= hi) return 1.0;
    const double pos = (t - lo) / h;
    const int i = static_cast<int>(pos);
    const double w = pos - i;
    return (1 - w) * cdf[i] + w * cdf[i + 1];
  };
  RngStream rng(4);
  std::vector<double> draws;
  for (int i = 0; i < 3000; ++i) draws.push_back(mu.sample(rng)(0));
  const double d = stats::ks_statistic(draws, cdf_at);
  CHECK(stats::ks_pvalue(d, 3000) > 0.01);
}

TEST_CASE("smoothed sampler matches a projected-density oracle at k = 2") {
  const double xi = 0.5;
  const Measure mu = gaussian_smoothing(cube(2), xi);
  const double root = std::sqrt(1.0 - xi * xi);
  const double c = 0.6, s = 0.8;
  // Projection of the smoothed square onto (c, s): the trapezoidal law of
  // c U1 + s U2 scaled by root, convolved with a xi-width Gaussian. The CDF
  // needs one quadrature against the normal CDF.
  const double a = std::sqrt(3.0);
  auto trapezoid = [&](double t) {
    // f_T(t) = int f_{U1}(u) (1/s) f_{U2}((t - c u)/s) du for T = cU1 + sU2.
    return oracles::simpson(
        [&](double u) {
          const double inner = (t - c * u) / s;
          const double f1 = std::abs(u) <= a ? 1.0 / (2 * a) : 0.0;
          const double f2 = std::abs(inner) <= a ? 1.0 / (2 * a * s) : 0.0;
          return f1 * f2;
        },
        -a, a, 400);
  };
  auto cdf_at = [&](double t) {
    const double span = a * (c + s) + 1e-9;
    return oracles::simpson(
        [&](double u) {
          return trapezoid(u) *
                 stats::normal_cdf((t - root * u) / xi);
        },
        -span, span, 600);
  };
  RngStream rng(5);
  std::vector<double> draws;
  Vector dir(2);
  dir << c, s;
  for (int i = 0; i < 1500; ++i) draws.push_back(mu.sample(rng).dot(dir));
  const double d = stats::ks_statistic(draws, cdf_at);
  CHECK(stats::ks_pvalue(d, 1500) > 0.01);
}

TEST_CASE("laplace product coordinates match the closed-form CDF") {
  const Measure mu = laplace_product(3);
  RngStream rng(22);
  std::vector<double> xs;
  for (int i = 0; i < 4000; ++i) xs.push_back(mu.sample(rng)(1));
  const double b = 1.0 / std::sqrt(2.0);
  auto cdf = [&](double t) {
    return t < 0 ? 0.5 * std::exp(t / b) : 1.0 - 0.5 * std::exp(-t / b);
  };
  const double d = stats::ks_statistic(xs, cdf);
  CHECK(stats::ks_pvalue(d, 4000) > 0.01);
}

TEST_CASE("l2 ball projections match the power-law marginal") {
  // Projection of the uniform ball onto any direction has density
  // proportional to (1 - (t/R)^2)^((n-1)/2); at n = 3 the CDF is cubic.
  const int n = 3;
  const Measure mu = lp_ball(2, n);
  const double radius = std::sqrt(n + 2.0);
  RngStream rng(23);
  Vector dir(3);
  dir << 0.48, -0.6, 0.64;
  dir.normalize();
  std::vector<double> xs;
  for (int i = 0; i < 4000; ++i) xs.push_back(mu.sample(rng).dot(dir));
  auto cdf = [&](double t) {
    const double u = std::clamp(t / radius, -1.0, 1.0);
    return 0.25 * (2.0 + 3.0 * u - u * u * u);
  };
  const double d = stats::ks_statistic(xs, cdf);
  CHECK(stats::ks_pvalue(d, 4000) > 0.01);
}

TEST_CASE("smoothing preserves isotropicity") {
  const Measure mu = gaussian_smoothing(cube(2), 0.5);
  CHECK((*mu.covariance() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <
        1e-12);
  RngStream rng(5);
  const auto est = covariance_estimate(mu, 60000, rng);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(est.cov(i, j) - (i == j ? 1.0 : 0.0)) <=
            5 * est.se(i, j));
}

TEST_CASE("marginals") {
  SUBCASE("gaussian marginal is gaussian") {
    RngStream rng(6);
    const Subspace f = grasslab::grassmann::haar_sample(5, 2, rng);
    const Measure marg = marginal(gaussian(5), f);
    CHECK(marg.descriptor().name == "gaussian");
    CHECK(marg.dim() == 2);
  }
  SUBCASE("cube coordinate marginal is the uniform interval") {
    const Measure marg = marginal(cube(2), Subspace::coordinate(2, 1));
    RngStream rng(7);
    std::vector<double> xs;
    for (int i = 0; i < 3000; ++i) xs.push_back(marg.sample(rng)(0));
    const double a = std::sqrt(3.0);
    const double d = stats::ks_statistic(xs, [&](double t) {
      return std::clamp((t + a) / (2 * a), 0.0, 1.0);
    });
    CHECK(stats::ks_pvalue(d, 3000) > 0.01);
  }
  SUBCASE("marginal covariance is the frame restriction") {
    RngStream rng(8);
    Matrix map = Matrix::Identity(3, 3);
    map(0, 0) = 2.0;
    const Measure stretched =
        linear_pushforward(gaussian(3), map, Vector::Zero(3));
    const Subspace f = grasslab::grassmann::haar_sample(3, 2, rng);
    const Measure marg = marginal(stretched, f);
    const Matrix expected =
        f.frame().transpose() * (*stretched.covariance()) * f.frame();
    CHECK((*marg.covariance() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fiber density at zero") {
  SUBCASE("gaussian fibers are exact powers of 2 pi") {
    RngStream rng(9);
    for (int k : {1, 3}) {
      const Subspace f = grasslab::grassmann::haar_sample(5, k, rng);
      RngStream sub = rng.child(k);
      const auto est = marginal_density_at_zero(gaussian(5), f, 20000, sub);
      CHECK(est.value ==
            doctest::Approx(std::pow(2 * M_PI, -0.5 * k)).epsilon(0.02));
    }
  }
  SUBCASE("cube coordinate fiber (exact route)") {
    RngStream rng(10);
    const auto est =
        marginal_density_at_zero(cube(2), Subspace::coordinate(2, 1), 1000,
                                 rng);
    CHECK(est.se == 0.0);
    CHECK(est.value ==
          doctest::Approx(1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-10));
  }
  SUBCASE("cube diagonal fiber equals the convolution oracle") {
    RngStream rng(11);
    const auto est =
        marginal_density_at_zero(cube(2), diagonal_line2(), 1000, rng);
    CHECK(est.value ==
          doctest::Approx(oracles::cube2_diagonal_density_at_zero())
              .epsilon(1e-9));
    CHECK(est.value == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-9));
  }
  SUBCASE("exact and importance-sampling routes agree") {
    RngStream rng(12);
    for (const char* name : {"cube", "lp1", "simplex"}) {
      CAPTURE(name);
      const Measure mu = builtin(name, 4);
      const Subspace f = grasslab::grassmann::haar_sample(4, 1, rng);
      RngStream r1 = rng.child(1);
      RngStream r2 = rng.child(2);
      const auto exact = marginal_density_at_zero(mu, f, 1000, r1);
      const auto is = marginal_density_at_zero_is(mu, f, 120000, r2);
      CHECK(exact.se == 0.0);
      CHECK(std::abs(is.value - exact.value) <= 3.5 * is.se);
    }
  }
  SUBCASE("wide proposal engages for the octahedron at high dimension") {
    const Measure mu = lp_ball(1, 8);
    const Subspace f = Subspace::coordinate(8, 1);
    RngStream r(14);
    const auto est = marginal_density_at_zero_is(mu, f, 150000, r);
    CHECK(est.method.find("wide") != std::string::npos);
    // Coordinate fiber of the octahedron: flat density times the
    // cross-polytope volume one dimension down.
    const double R = std::sqrt(0.5 * 9.0 * 10.0);
    const double vol7 = std::exp(7 * std::log(2 * R) - std::lgamma(8.0));
    const double flat = std::exp(-(8 * std::log(2 * R) - std::lgamma(9.0)));
    CHECK(std::abs(est.value - flat * vol7) <= 4 * est.se);
  }
}

TEST_CASE("covariance scaling law under a pushforward") {
  Matrix map = Matrix::Identity(3, 3);
  map(0, 0) = 2.0;
  const Measure mu = linear_pushforward(gaussian(3), map, Vector::Zero(3));
  RngStream rng(15);
  const auto est = covariance_estimate(mu, 60000, rng);
  CHECK(std::abs(est.cov(0, 0) - 4.0) <= 5 * est.se(0, 0));
  CHECK(std::abs(est.cov(1, 1) - 1.0) <= 5 * est.se(1, 1));
}

TEST_CASE("isotropize whitens a correlated gaussian") {
  Matrix map(2, 2);
  map << 1.5, 0.9, 0.0, 0.6;
  const Measure skewed =
      linear_pushforward(gaussian(2), map, Vector::Zero(2));
  RngStream rng(16);
  const Measure white = isotropize(skewed, 60000, rng);
  RngStream check(17);
  const auto est = covariance_estimate(white, 60000, check);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(est.cov(i, j) - (i == j ? 1.0 : 0.0)) <=
            5 * est.se(i, j) + 2e-2);
  // Matrix inverse-square-root oracle: whitening the true covariance gives
  // the identity.
  const Matrix true_cov = map * map.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(true_cov);
  const Matrix root_inv =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  CHECK((root_inv * true_cov * root_inv - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("isotropize scaling: doubled gaussian maps back to unit scale") {
  Matrix map = 2.0 * Matrix::Identity(2, 2);
  const Measure doubled =
      linear_pushforward(gaussian(2), map, Vector::Zero(2));
  RngStream rng(18);
  const Measure white = isotropize(doubled, 80000, rng);
  RngStream check(19);
  const auto est = covariance_estimate(white, 60000, check);
  for (int i = 0; i < 2; ++i)
    CHECK(est.cov(i, i) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("special measure pair") {
  const auto [mu1, mu2] = special_measure_pair(2, 5, 0.5, "cube");
  CHECK(mu1.dim() == 2);
  CHECK(mu2.dim() == 5);
  RngStream rng(20);
  std::vector<double> a, b;
  Vector dir(2);
  dir << 0.6, 0.8;
  for (int i = 0; i < 3000; ++i) {
    a.push_back(mu2.sample(rng).head(2).dot(dir));
    b.push_back(mu1.sample(rng).dot(dir));
  }
  CHECK(stats::ks_test_two_sample(a, b) > 0.01);
  CHECK((*mu2.covariance() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sample batches are reproducible") {
  const Measure mu = product(cube(2), gaussian(1));
  const auto b1 = sample_batch(mu, 200, 77);
  const auto b2 = sample_batch(mu, 200, 77);
  const auto b3 = sample_batch(mu, 200, 78);
  CHECK((b1.points - b2.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b1.points - b3.points).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("descriptor grammar round-trips") {
  const Measure mu = gaussian_smoothing(product(cube(2), lp_ball(1, 3)), 0.7);
  const std::string text = mu.descriptor().to_string();
  const Measure back = from_descriptor(text);
  CHECK(back.descriptor().to_string() == text);
  CHECK(back.dim() == 5);
  CHECK_THROWS_AS((void)from_descriptor("unknown_thing(3)"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)from_descriptor("cube(2) trailing"),
                  std::invalid_argument);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS((void)builtin("nope", 3), std::invalid_argument);
  CHECK_THROWS_AS((void)lp_ball(3, 4), std::invalid_argument);
  CHECK_THROWS_AS(
      (void)product(linear_pushforward(gaussian(1), Matrix::Identity(1, 1),
                                       Vector::Constant(1, 0.5)),
                    gaussian(1)),
      std::invalid_argument);
  const Measure nodens = convolve(gaussian(2), gaussian(2));
  CHECK(!nodens.has_density());
  CHECK_THROWS(nodens.log_density(Vector::Zero(2)));
}
