#include "grasslab/lowdim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace grasslab::lowdim {

namespace {

using Eigen::Vector3d;

double spread(const Matrix& pts) {
  double s = 0.0;
  for (int i = 0; i < pts.cols(); ++i) s = std::max(s, pts.col(i).norm());
  return s;
}

Matrix dedupe(const Matrix& pts, double tol) {
  std::vector<int> keep;
  for (int i = 0; i < pts.cols(); ++i) {
    bool fresh = true;
    for (int j : keep) {
      if ((pts.col(i) - pts.col(j)).norm() < tol) {
        fresh = false;
        break;
      }
    }
    if (fresh) keep.push_back(i);
  }
  Matrix out(pts.rows(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) out.col(i) = pts.col(keep[i]);
  return out;
}

// ---------------------------------------------------------------- dim 2 ----

std::vector<int> hull_indices_2d(const Matrix& pts) {
  const int m = static_cast<int>(pts.cols());
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (pts(0, a) != pts(0, b)) return pts(0, a) < pts(0, b);
    return pts(1, a) < pts(1, b);
  });
  auto cross = [&](int o, int a, int b) {
    return (pts(0, a) - pts(0, o)) * (pts(1, b) - pts(1, o)) -
           (pts(1, a) - pts(1, o)) * (pts(0, b) - pts(0, o));
  };
  std::vector<int> hull;
  // Monotone chain, lower then upper.
  for (int i : idx) {
    while (hull.size() >= 2 &&
           cross(hull[hull.size() - 2], hull.back(), i) <= 0)
      hull.pop_back();
    hull.push_back(i);
  }
  const std::size_t lower = hull.size() + 1;
  for (auto it = idx.rbegin() + 1; it != idx.rend(); ++it) {
    while (hull.size() >= lower &&
           cross(hull[hull.size() - 2], hull.back(), *it) <= 0)
      hull.pop_back();
    hull.push_back(*it);
  }
  hull.pop_back();
  return hull;
}

double hull_area_2d(const Matrix& pts) {
  if (pts.cols() < 3) return 0.0;
  const auto hull = hull_indices_2d(pts);
  if (hull.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& p = pts.col(hull[i]);
    const auto& q = pts.col(hull[(i + 1) % hull.size()]);
    a += p(0) * q(1) - q(0) * p(1);
  }
  return 0.5 * std::abs(a);
}

// ---------------------------------------------------------------- dim 3 ----

struct Face {
  int a, b, c;
  Vector3d normal;  // outward, unit
  double offset;    // normal . x = offset on the face plane
  bool alive = true;
};

/// Incremental convex hull in 3-d; returns oriented faces. Points are
/// assumed deduped. Throws on fully degenerate input.
std::vector<Face> hull_faces_3d(const Matrix& pts, double eps) {
  const int m = static_cast<int>(pts.cols());
  if (m < 4) return {};

  // Seed tetrahedron: farthest pair, then farthest from the line, then from
  // the plane.
  int i0 = 0, i1 = 1;
  double best = -1.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double d = (pts.col(i) - pts.col(j)).squaredNorm();
      if (d > best) {
        best = d;
        i0 = i;
        i1 = j;
      }
    }
  if (best < eps * eps) return {};
  const Vector3d p0 = pts.col(i0), p1 = pts.col(i1);
  int i2 = -1;
  best = eps;
  for (int i = 0; i < m; ++i) {
    const Vector3d d = pts.col(i).head<3>() - p0;
    const double dist = (d - d.dot((p1 - p0).normalized()) *
                                 (p1 - p0).normalized())
                            .norm();
    if (dist > best) {
      best = dist;
      i2 = i;
    }
  }
  if (i2 < 0) return {};
  const Vector3d p2 = pts.col(i2);
  const Vector3d plane_n = (p1 - p0).cross(p2 - p0).normalized();
  int i3 = -1;
  best = eps;
  for (int i = 0; i < m; ++i) {
    const double dist = std::abs(plane_n.dot(pts.col(i).head<3>() - p0));
    if (dist > best) {
      best = dist;
      i3 = i;
    }
  }
  if (i3 < 0) return {};

  std::vector<Face> faces;
  auto make_face = [&](int a, int b, int c, const Vector3d& inside) {
    Face f;
    f.a = a;
    f.b = b;
    f.c = c;
    Vector3d n = (pts.col(b).head<3>() - pts.col(a).head<3>())
                     .cross(pts.col(c).head<3>() - pts.col(a).head<3>());
    const double nn = n.norm();
    n /= nn;
    double off = n.dot(pts.col(a).head<3>());
    if (n.dot(inside) > off) {
      std::swap(f.b, f.c);
      n = -n;
      off = -off;
    }
    f.normal = n;
    f.offset = off;
    return f;
  };
  const Vector3d centroid =
      (p0 + p1 + p2 + Vector3d(pts.col(i3).head<3>())) / 4.0;
  faces.push_back(make_face(i0, i1, i2, centroid));
  faces.push_back(make_face(i0, i1, i3, centroid));
  faces.push_back(make_face(i0, i2, i3, centroid));
  faces.push_back(make_face(i1, i2, i3, centroid));

  for (int p = 0; p < m; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    const Vector3d x = pts.col(p);
    // Faces visible from x.
    std::vector<int> visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      if (faces[f].normal.dot(x) > faces[f].offset + eps)
        visible.push_back(static_cast<int>(f));
    }
    if (visible.empty()) continue;
    // Horizon = edges shared by exactly one visible face.
    std::vector<std::pair<int, int>> horizon;
    auto add_edge = [&](int a, int b) {
      for (auto it = horizon.begin(); it != horizon.end(); ++it) {
        if (it->first == b && it->second == a) {
          horizon.erase(it);
          return;
        }
      }
      horizon.emplace_back(a, b);
    };
    for (int f : visible) {
      add_edge(faces[f].a, faces[f].b);
      add_edge(faces[f].b, faces[f].c);
      add_edge(faces[f].c, faces[f].a);
      faces[f].alive = false;
    }
    for (const auto& [a, b] : horizon)
      faces.push_back(make_face(a, b, p, centroid));
  }
  std::vector<Face> out;
  for (auto& f : faces)
    if (f.alive) out.push_back(f);
  return out;
}

double hull_volume_3d(const Matrix& pts) {
  const double scale = spread(pts);
  if (scale <= 0.0) return 0.0;
  const auto faces = hull_faces_3d(pts, 1e-12 * std::max(1.0, scale));
  if (faces.empty()) return 0.0;
  Vector3d c = Vector3d::Zero();
  for (int i = 0; i < pts.cols(); ++i) c += pts.col(i).head<3>();
  c /= static_cast<double>(pts.cols());
  double vol = 0.0;
  for (const auto& f : faces) {
    const Vector3d a = pts.col(f.a).head<3>() - c;
    const Vector3d b = pts.col(f.b).head<3>() - c;
    const Vector3d d = pts.col(f.c).head<3>() - c;
    vol += std::abs(a.cross(b).dot(d));
  }
  return vol / 6.0;
}

}  // namespace

double hull_volume(const Matrix& points) {
  const int dim = static_cast<int>(points.rows());
  if (points.cols() == 0) return 0.0;
  const Matrix pts = dedupe(points, 1e-12 * std::max(1.0, spread(points)));
  switch (dim) {
    case 1: {
      double lo = pts.row(0).minCoeff(), hi = pts.row(0).maxCoeff();
      return hi - lo;
    }
    case 2:
      return hull_area_2d(pts);
    case 3:
      return hull_volume_3d(pts);
    default:
      throw std::invalid_argument("hull_volume: dimension must be <= 3");
  }
}

Matrix hull_vertices(const Matrix& points) {
  const int dim = static_cast<int>(points.rows());
  const Matrix pts = dedupe(points, 1e-12 * std::max(1.0, spread(points)));
  if (dim == 1) {
    Matrix out(1, 2);
    out(0, 0) = pts.row(0).minCoeff();
    out(0, 1) = pts.row(0).maxCoeff();
    return out;
  }
  if (dim == 2) {
    const auto hull = hull_indices_2d(pts);
    Matrix out(2, hull.size());
    for (std::size_t i = 0; i < hull.size(); ++i)
      out.col(i) = pts.col(hull[i]);
    return out;
  }
  if (dim == 3) {
    const auto faces = hull_faces_3d(pts, 1e-12 * std::max(1.0, spread(pts)));
    std::vector<int> used;
    for (const auto& f : faces)
      for (int v : {f.a, f.b, f.c})
        if (std::find(used.begin(), used.end(), v) == used.end())
          used.push_back(v);
    Matrix out(3, used.size());
    for (std::size_t i = 0; i < used.size(); ++i) out.col(i) = pts.col(used[i]);
    return out;
  }
  throw std::invalid_argument("hull_vertices: dimension must be <= 3");
}

Matrix vertex_enumeration(const Halfspaces& h) {
  const int d = h.dim();
  const int m = h.count();
  if (d < 1 || d > 3)
    throw std::invalid_argument("vertex_enumeration: dimension must be <= 3");
  // Zero-normal rows are vacuous when b >= 0 and infeasible otherwise; they
  // must not contaminate the scale estimate.
  double scale = 1.0;
  for (int i = 0; i < m; ++i) {
    const double an = h.a.row(i).norm();
    if (an < 1e-12) {
      if (h.b(i) < -1e-12) return Matrix(d, 0);
      continue;
    }
    scale = std::max(scale, std::abs(h.b(i)) / an);
  }
  const double feas_tol = 1e-9 * scale;

  std::vector<Vector> verts;
  std::array<int, 3> pick{};
  auto consider = [&](const std::array<int, 3>& rows) {
    Matrix a(d, d);
    Vector b(d);
    for (int r = 0; r < d; ++r) {
      a.row(r) = h.a.row(rows[r]);
      b(r) = h.b(rows[r]);
    }
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) return;
    const Vector x = lu.solve(b);
    if (!x.allFinite()) return;
    for (int i = 0; i < m; ++i) {
      if (h.a.row(i).dot(x) > h.b(i) + feas_tol) return;
    }
    for (const Vector& v : verts)
      if ((v - x).norm() < 1e-9 * std::max(1.0, scale)) return;
    verts.push_back(x);
  };

  if (d == 1) {
    for (int i = 0; i < m; ++i) {
      pick = {i, 0, 0};
      consider(pick);
    }
  } else if (d == 2) {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        pick = {i, j, 0};
        consider(pick);
      }
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int k = j + 1; k < m; ++k) {
          pick = {i, j, k};
          consider(pick);
        }
  }
  Matrix out(d, verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) out.col(i) = verts[i];
  return out;
}

double hpoly_volume(const Halfspaces& h) {
  const Matrix verts = vertex_enumeration(h);
  if (verts.cols() == 0) return 0.0;
  return hull_volume(verts);
}

double hpoly_radial(const Halfspaces& h, const Vector& u) {
  double t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < h.count(); ++i) {
    const double au = h.a.row(i).dot(u);
    if (au > 0.0) t = std::min(t, h.b(i) / au);
  }
  return t;
}

double symmetric_cross_polytope_lower(const Matrix& points) {
  const int d = static_cast<int>(points.rows());
  const int m = static_cast<int>(points.cols());
  if (m < d) return 0.0;
  // Greedy: repeatedly take the point with the largest residual after
  // projecting out the span of the chosen ones.
  Matrix chosen(d, d);
  Matrix basis(d, d);  // orthonormalized chosen directions
  std::vector<char> used(m, 0);
  double log_det = 0.0;
  for (int step = 0; step < d; ++step) {
    int best = -1;
    double best_norm = 0.0;
    Vector best_res;
    for (int i = 0; i < m; ++i) {
      if (used[i]) continue;
      Vector r = points.col(i);
      for (int j = 0; j < step; ++j) r -= basis.col(j).dot(r) * basis.col(j);
      const double rn = r.norm();
      if (rn > best_norm) {
        best_norm = rn;
        best = i;
        best_res = r;
      }
    }
    if (best < 0 || best_norm <= 0.0) return 0.0;
    used[best] = 1;
    chosen.col(step) = points.col(best);
    basis.col(step) = best_res / best_norm;
    log_det += std::log(best_norm);
  }
  // vol conv(+-q_1..+-q_d) = 2^d |det| / d!
  double log_vol = d * std::log(2.0) + log_det - std::lgamma(d + 1.0);
  return std::exp(log_vol);
}

double unit_ball_volume(int d) {
  return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

}  // namespace grasslab::lowdim
