#pragma once

#include <Eigen/Dense>
#include <vector>

namespace grasslab::lowdim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Halfspace intersection {x : a_i . x <= b_i}; rows of `a` are the normals.
struct Halfspaces {
  Matrix a;
  Vector b;
  int dim() const { return static_cast<int>(a.cols()); }
  int count() const { return static_cast<int>(a.rows()); }
};

/// Exact volume of the convex hull of the given points (columns), dim <= 3.
/// Degenerate inputs give 0.
double hull_volume(const Matrix& points);

/// Extreme points of the hull in dimension <= 3 (columns). Interior points
/// are dropped; the result is not ordered.
Matrix hull_vertices(const Matrix& points);

/// All vertices of a bounded halfspace intersection, dim <= 3, by basis
/// enumeration with feasibility filtering.
Matrix vertex_enumeration(const Halfspaces& h);

/// Exact volume of a bounded halfspace intersection, dim <= 3.
double hpoly_volume(const Halfspaces& h);

/// Radial function of the halfspace intersection along unit direction u:
/// sup { t >= 0 : t*u inside }. Requires the origin inside; +inf when the
/// ray never exits.
double hpoly_radial(const Halfspaces& h, const Vector& u);

/// Volume of the largest cross-polytope conv(+-q_1, .., +-q_d) found by a
/// greedy orthogonal-residual sweep over the given points (columns). The
/// cross-polytope sits inside conv(+-points), so for a symmetric body that
/// contains the points this is a certified volume lower bound.
double symmetric_cross_polytope_lower(const Matrix& points);

/// Volume of the unit ball in dimension d.
double unit_ball_volume(int d);

}  // namespace grasslab::lowdim
