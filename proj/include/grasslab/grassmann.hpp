#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "grasslab/estimate.hpp"
#include "grasslab/rng.hpp"

namespace grasslab::grassmann {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// The two metrics used on G_{n,k}: the operator-norm gap between orthogonal
/// projectors, and the smallest operator norm of I - U over rotations U that
/// carry one subspace onto the other.
enum class Metric { kSigmaInf, kMinRotation };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

/// A point of G_{n,k}, stored as an n x k orthonormal frame. Frames are only
/// canonical up to right-multiplication by a k x k orthogonal matrix, so
/// subspace equality is always tested through a metric, never on frames.
class Subspace {
 public:
  Subspace(int n, Matrix frame);

  /// Orthonormalize the given columns (QR with positive-diagonal sign fix,
  /// so the frame is a deterministic function of the input).
  static Subspace from_span(const Matrix& columns);
  static Subspace coordinate(int n, int k);  // span(e_1..e_k)

  int n() const { return n_; }
  int k() const { return static_cast<int>(frame_.cols()); }
  const Matrix& frame() const { return frame_; }
  Matrix projector() const { return frame_ * frame_.transpose(); }
  /// Orthonormal basis of the orthogonal complement, n x (n-k).
  Matrix complement_frame() const;
  Subspace complement() const;

  std::string digest() const;

 private:
  int n_;
  Matrix frame_;
};

/// An element of O(n).
struct Rotation {
  Matrix matrix;
  int n() const { return static_cast<int>(matrix.rows()); }
};

/// Canonical angles between two k-dimensional subspaces, nondecreasing,
/// each in [0, pi/2].
struct PrincipalAngles {
  std::vector<double> angles;
  double max() const { return angles.empty() ? 0.0 : angles.back(); }
};

PrincipalAngles principal_angles(const Subspace& e, const Subspace& f);

/// Operator norm of P_E - P_F; equals sin of the largest principal angle.
double sigma_inf(const Subspace& e, const Subspace& f);

/// inf { |I - U|_op : U in O(n), U(E) = F }, evaluated through the
/// closed form 2 sin(theta_max / 2).
double metric_d(const Subspace& e, const Subspace& f);

double metric_value(Metric m, const Subspace& e, const Subspace& f);

/// Diameter of (G_{n,k}, metric): 1 for sigma_inf, sqrt(2) for d.
double metric_diameter(Metric m);

/// Haar-distributed subspace: orthonormalized n x k Gaussian matrix.
Subspace haar_sample(int n, int k, RngStream& rng);

/// Uniform random rotation from O(n) (Haar on the orthogonal group).
Rotation haar_rotation(int n, RngStream& rng);

/// A subspace F with metric(E, F) <= delta. A Gaussian tangent block is moved
/// along its one-parameter rotation by an angle radius delta-mapped and
/// distributed like u^(1/dim) on (0,1), then rejection-checked against the
/// requested metric.
Subspace ball_sample(const Subspace& center, double delta, Metric metric,
                     RngStream& rng);

/// Fraction of Haar samples within delta of the center, binomial stderr.
EstimateWithCI ball_measure_estimate(const Subspace& center, double delta,
                                     Metric metric, std::int64_t n_samples,
                                     RngStream& rng);

/// Greedy maximal eps-separated set under the diameter-normalized metric;
/// a lower bound for the packing number found within the sampling budget.
int packing_number_estimate(int n, int k, double eps, Metric metric,
                            std::int64_t budget, RngStream& rng);

/// A rotation U with U(E) = F and |I - U|_op = metric_d(E, F), built from
/// the principal-vector planes.
Rotation rotation_mapping(const Subspace& e, const Subspace& f);

/// Plain-text frame serialization: one row per line, space-separated.
std::string to_text(const Subspace& s);
Subspace subspace_from_text(const std::string& text);

}  // namespace grasslab::grassmann
