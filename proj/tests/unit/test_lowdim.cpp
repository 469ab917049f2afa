#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "grasslab/lowdim.hpp"
#include "grasslab/rng.hpp"
#include "support/oracles.hpp"

using namespace grasslab::lowdim;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

Matrix cube_vertices(int d, double half) {
  Matrix v(d, 1 << d);
  for (int s = 0; s < (1 << d); ++s)
    for (int i = 0; i < d; ++i) v(i, s) = ((s >> i) & 1) ? half : -half;
  return v;
}

Halfspaces cube_halfspaces(int d, double half) {
  Halfspaces h;
  h.a = Matrix::Zero(2 * d, d);
  h.b = Vector::Constant(2 * d, half);
  for (int i = 0; i < d; ++i) {
    h.a(2 * i, i) = 1;
    h.a(2 * i + 1, i) = -1;
  }
  return h;
}

}  // namespace

TEST_CASE("segment length") {
  Matrix pts(1, 3);
  pts << -1, 0.2, 1;
  CHECK(hull_volume(pts) == doctest::Approx(2.0));
}

TEST_CASE("square area with interior points") {
  Matrix pts(2, 6);
  pts << -1, 1, 1, -1, 0, 0.3, -1, -1, 1, 1, 0, -0.2;
  CHECK(hull_volume(pts) == doctest::Approx(4.0));
}

TEST_CASE("3-cube volume from its vertices") {
  CHECK(hull_volume(cube_vertices(3, 1.0)) == doctest::Approx(8.0));
}

TEST_CASE("random rotations preserve hull volume") {
  grasslab::RngStream rng(3);
  Matrix pts = cube_vertices(3, 1.0);
  // Rotation from QR of a Gaussian matrix.
  Matrix g(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  CHECK(hull_volume(q * pts) == doctest::Approx(8.0).epsilon(1e-9));
}

TEST_CASE("tetrahedron volume") {
  Matrix pts(3, 4);
  pts << 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(hull_volume(pts) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("degenerate 3d input gives zero volume") {
  Matrix pts(3, 4);
  pts << 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3;
  CHECK(hull_volume(pts) == doctest::Approx(0.0));
}

TEST_CASE("vertex enumeration recovers the cube") {
  const Matrix verts = vertex_enumeration(cube_halfspaces(3, 1.0));
  CHECK(verts.cols() == 8);
  CHECK(hull_volume(verts) == doctest::Approx(8.0));
}

TEST_CASE("hpoly volume of a sheared square") {
  // {|x|<=1, |y|<=1} sheared: volume is preserved by the unimodular map.
  Halfspaces h = cube_halfspaces(2, 1.0);
  Matrix shear(2, 2);
  shear << 1, 0.7, 0, 1;
  // {x : A x <= b} mapped by y = S x has A S^{-1} y <= b.
  h.a = h.a * shear.inverse();
  CHECK(hpoly_volume(h) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("hpoly radial function of the square") {
  Halfspaces h = cube_halfspaces(2, 1.0);
  Vector u(2);
  u << 1, 0;
  CHECK(hpoly_radial(h, u) == doctest::Approx(1.0));
  u << 1, 1;
  u.normalize();
  CHECK(hpoly_radial(h, u) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cross polytope lower bound is exact for its own vertices") {
  Matrix pts = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) pts(i, i) = 2.0;
  // vol = 2^d |det| / d! = 16 * 16 / 24
  CHECK(symmetric_cross_polytope_lower(pts) ==
        doctest::Approx(16.0 * 16.0 / 24.0));
  // Adding interior points must not reduce the bound.
  Matrix more(4, 6);
  more.leftCols(4) = pts;
  more.col(4) = Vector::Constant(4, 0.1);
  more.col(5) = -Vector::Constant(4, 0.2);
  CHECK(symmetric_cross_polytope_lower(more) >=
        symmetric_cross_polytope_lower(pts) - 1e-12);
}

TEST_CASE("unit ball volumes match the closed forms") {
  CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
  CHECK(unit_ball_volume(2) == doctest::Approx(M_PI));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * M_PI / 3.0));
}
