#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grasslab/estimate.hpp"
#include "grasslab/grassmann.hpp"
#include "grasslab/lowdim.hpp"
#include "grasslab/rng.hpp"

namespace grasslab::measures {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Construction-tree descriptor: name(param, .., child, ..). Serializes to
/// the text form used in experiment configs and result manifests.
struct Descriptor {
  std::string name;
  std::vector<double> params;
  std::vector<Descriptor> children;

  std::string to_string() const;
  static Descriptor parse(const std::string& text);
};

class MeasureImpl;

/// A log-concave probability measure exposing a sampler and, where
/// available, a closed-form (or numerically evaluated) density. Immutable
/// after construction; sampling is pure in the RNG stream.
class Measure {
 public:
  Measure() = default;
  explicit Measure(std::shared_ptr<const MeasureImpl> impl);

  bool valid() const { return impl_ != nullptr; }
  int dim() const;
  bool centered() const;
  bool has_density() const;
  /// log f(x); -inf outside the support. Throws when has_density() is false.
  double log_density(const Vector& x) const;
  double density(const Vector& x) const;
  /// Exact covariance when known by construction.
  std::optional<Matrix> covariance() const;
  /// Upper bound for |x| over the support; empty when unbounded.
  std::optional<double> support_radius() const;
  /// Halfspace description of the support for uniform-on-polytope measures.
  std::optional<lowdim::Halfspaces> support_halfspaces() const;
  /// Constant log-density value for uniform measures.
  std::optional<double> uniform_log_density() const;
  Vector sample(RngStream& rng) const;
  Descriptor descriptor() const;

 private:
  std::shared_ptr<const MeasureImpl> impl_;
};

/// Centered isotropic built-ins with closed-form density.
/// Names: gaussian, cube, lp_ball(p in {1,2,inf}), simplex, laplace_product.
Measure gaussian(int n);
Measure cube(int n);
Measure lp_ball(double p, int n);
Measure simplex(int n);
Measure laplace_product(int n);
Measure builtin(const std::string& name, int n);
/// Builds a measure from its descriptor tree.
Measure from_descriptor(const Descriptor& d);
Measure from_descriptor(const std::string& text);

/// Product measure on dim(mu) + dim(nu); density multiplies, sampler
/// concatenates independent draws.
Measure product(const Measure& mu, const Measure& nu);

/// The Gaussian-smoothed measure: law of sqrt(1-xi^2) X + xi G. Its density
/// is evaluated by quadrature of the defining convolution integral for
/// dim <= 2 and by sample-averaged convolution above.
Measure gaussian_smoothing(const Measure& mu, double xi);

/// Marginal on the frame coordinates of F; density generally absent.
Measure marginal(const Measure& mu, const grassmann::Subspace& f);

/// Law of the sum of independent draws (density absent).
Measure convolve(const Measure& a, const Measure& b);

/// Pushforward x -> map * (x - shift); density transforms with the
/// log-determinant when available.
Measure linear_pushforward(const Measure& mu, const Matrix& map,
                           const Vector& shift);

struct SampleBatch {
  Matrix points;  // N x n
  std::uint64_t seed = 0;
  std::int64_t n = 0;
};
SampleBatch sample_batch(const Measure& mu, std::int64_t count,
                         std::uint64_t seed);

/// f_{pi_F mu}(0) as the fiber integral of f_mu over the orthogonal
/// complement of F. Exact (density x exact section volume) for
/// uniform-on-polytope measures with complement dimension <= 3, otherwise
/// importance sampling with a Gaussian proposal matched to the covariance
/// restriction (widened for compact supports that extend far beyond it).
EstimateWithCI marginal_density_at_zero(const Measure& mu,
                                        const grassmann::Subspace& f,
                                        std::int64_t n_samples,
                                        const RngStream& rng);
/// Force the importance-sampling route (used to cross-check the exact one).
EstimateWithCI marginal_density_at_zero_is(const Measure& mu,
                                           const grassmann::Subspace& f,
                                           std::int64_t n_samples,
                                           const RngStream& rng);

struct CovarianceEstimate {
  Matrix cov;
  Matrix se;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
};
CovarianceEstimate covariance_estimate(const Measure& mu, std::int64_t n,
                                       const RngStream& rng);

/// Empirical whitening: subtract the sample mean, multiply by the inverse
/// square root of the sample covariance.
Measure isotropize(const Measure& mu, std::int64_t n, const RngStream& rng);

/// mu1 = gaussian_smoothing(base(k), xi), mu2 = mu1 x gaussian(n - k).
std::pair<Measure, Measure> special_measure_pair(int k, int n, double xi,
                                                 const std::string& base);

}  // namespace grasslab::measures
