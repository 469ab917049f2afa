#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "grasslab/estimate.hpp"
#include "grasslab/grassmann.hpp"
#include "grasslab/lowdim.hpp"
#include "grasslab/measures.hpp"
#include "grasslab/rng.hpp"

namespace grasslab::geometry {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A convex body evaluated through its support function. Exact halfspace or
/// vertex representations ride along when the body is a polytope; balls keep
/// their radius so sections and volumes stay closed-form.
class ConvexBody {
 public:
  using SupportFn = std::function<double(const Vector&)>;
  using SupportCiFn = std::function<EstimateWithCI(const Vector&)>;
  using ContactFn = std::function<Vector(const Vector&)>;

  static ConvexBody from_support(int dim, bool symmetric, SupportFn support,
                                 ContactFn contact = nullptr,
                                 SupportCiFn support_ci = nullptr);
  static ConvexBody from_vertices(Matrix vertices, bool symmetric);
  static ConvexBody from_halfspaces(lowdim::Halfspaces h, bool symmetric);
  static ConvexBody ball(int dim, double radius);
  static ConvexBody cube(int dim, double half_side);
  static ConvexBody cross_polytope(int dim, double radius);

  int dim() const { return dim_; }
  bool symmetric() const { return symmetric_; }
  /// h_K(u); positively homogeneous in u.
  double support(const Vector& u) const;
  /// Support estimate with its standard error (zero for exact bodies).
  EstimateWithCI support_ci(const Vector& u) const;
  /// A boundary point p with <p, u> = h(u) (support gradient).
  Vector contact(const Vector& u) const;
  bool has_contact() const;

  const std::optional<lowdim::Halfspaces>& hrep() const { return hrep_; }
  const std::optional<Matrix>& vrep() const { return vrep_; }
  std::optional<double> ball_radius() const { return ball_radius_; }
  std::optional<double> exact_volume() const { return exact_volume_; }

  /// Plain-text serialization of the exact representation.
  std::string to_text() const;

 private:
  int dim_ = 0;
  bool symmetric_ = false;
  SupportFn support_;
  SupportCiFn support_ci_;
  ContactFn contact_;
  std::optional<lowdim::Halfspaces> hrep_;
  std::optional<Matrix> vrep_;
  std::optional<double> ball_radius_;
  std::optional<double> exact_volume_;
};

struct VolumeBracket {
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
};

/// Support function value of the L_q centroid body of mu in direction y,
/// ((1/N) sum |<x_i, y>|^q)^(1/q), with delta-method standard error.
EstimateWithCI zq_support(const measures::Measure& mu, double q,
                          const Vector& y, std::int64_t n_samples,
                          RngStream& rng);

/// The L_q centroid body as a support-evaluated ConvexBody; evaluations are
/// memoized per direction and each direction draws its own substream keyed
/// by the direction bytes, so results do not depend on evaluation order.
ConvexBody zq_body(const measures::Measure& mu, double q,
                   std::int64_t n_samples, const RngStream& rng);

/// Orthogonal projection onto F in frame coordinates:
/// h(y) = h_K(frame y); vertices project exactly.
ConvexBody project_body(const ConvexBody& k, const grassmann::Subspace& f);

/// Central section K intersect span(F) in frame coordinates. Requires a
/// halfspace representation (or a ball).
ConvexBody section_body(const ConvexBody& k, const grassmann::Subspace& f);

/// Exact volume, dimension <= 3 (polytopes) or any dimension (balls).
double volume_exact(const ConvexBody& k);

/// Deterministic direction set: +-coordinates, sign diagonals, then a
/// Kronecker low-discrepancy sphere sequence. Prefix-nested for a fixed
/// stream, so refinement is monotone.
Matrix direction_set(int dim, int count, const RngStream& rng);

/// Two-sided volume bracket: the outer bound is the volume of the support
/// halfspace intersection, the inner bound comes from the hull of contact
/// points (exact hulls up to dim 3; radial Monte Carlo for the outer body
/// and a greedy cross-polytope for the inner one above that). MC support
/// noise is absorbed by +-z_ci * se inflation when the body reports it.
VolumeBracket volume_sandwich(const ConvexBody& k, int n_directions,
                              const RngStream& rng, double z_ci = 3.0);

/// Circumradius and inradius over a probing direction sweep; symmetric
/// bodies only. Geometric distance to the ball is radius_ratio().
struct Radii {
  double circumradius = 0.0;
  double inradius = 0.0;
  double ratio() const { return circumradius / inradius; }
};
Radii radii(const ConvexBody& k, int n_directions, const RngStream& rng);

/// Both sides of the projection-section volume inequality pair for an exact
/// body: product bounded by binom(n,k) |K| from above and |K| from below.
struct ProjectionSectionReport {
  double proj_volume = 0.0;
  double section_volume = 0.0;
  double body_volume = 0.0;
  double binom = 0.0;
  double upper_ratio = 0.0;  // proj*section / (binom * |K|)
  double lower_ratio = 0.0;  // proj*section / |K|
  bool upper_ok = false;
  bool lower_ok = false;
};
ProjectionSectionReport rogers_shephard_check(const ConvexBody& k,
                                              const grassmann::Subspace& f);

/// CSV export of a support table: direction components, h, stderr, N.
void write_support_table(const ConvexBody& k, const Matrix& directions,
                         const std::string& path);

}  // namespace grasslab::geometry
