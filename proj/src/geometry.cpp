#include "grasslab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "grasslab/io.hpp"
#include "grasslab/stats.hpp"

namespace grasslab::geometry {

namespace {

double binomial(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

Vector unit(const Vector& u) {
  const double n = u.norm();
  if (n <= 0.0) throw std::invalid_argument("zero direction");
  return u / n;
}

}  // namespace

// -------------------------------------------------------------- factory ----

ConvexBody ConvexBody::from_support(int dim, bool symmetric, SupportFn support,
                                    ContactFn contact, SupportCiFn support_ci) {
  ConvexBody b;
  b.dim_ = dim;
  b.symmetric_ = symmetric;
  b.support_ = std::move(support);
  b.contact_ = std::move(contact);
  b.support_ci_ = std::move(support_ci);
  return b;
}

ConvexBody ConvexBody::from_vertices(Matrix vertices, bool symmetric) {
  ConvexBody b;
  b.dim_ = static_cast<int>(vertices.rows());
  b.symmetric_ = symmetric;
  auto verts = std::make_shared<Matrix>(std::move(vertices));
  b.vrep_ = *verts;
  b.support_ = [verts](const Vector& u) {
    return (verts->transpose() * u).maxCoeff();
  };
  b.contact_ = [verts](const Vector& u) {
    int idx = 0;
    (verts->transpose() * u).maxCoeff(&idx);
    return Vector(verts->col(idx));
  };
  return b;
}

ConvexBody ConvexBody::from_halfspaces(lowdim::Halfspaces h, bool symmetric) {
  ConvexBody b;
  b.dim_ = h.dim();
  b.symmetric_ = symmetric;
  b.hrep_ = std::move(h);
  if (b.dim_ <= 3) {
    const Matrix verts = lowdim::vertex_enumeration(*b.hrep_);
    if (verts.cols() > 0) {
      auto shared = std::make_shared<Matrix>(verts);
      b.vrep_ = *shared;
      b.support_ = [shared](const Vector& u) {
        return (shared->transpose() * u).maxCoeff();
      };
      b.contact_ = [shared](const Vector& u) {
        int idx = 0;
        (shared->transpose() * u).maxCoeff(&idx);
        return Vector(shared->col(idx));
      };
    }
  }
  return b;
}

ConvexBody ConvexBody::ball(int dim, double radius) {
  ConvexBody b;
  b.dim_ = dim;
  b.symmetric_ = true;
  b.ball_radius_ = radius;
  b.support_ = [radius](const Vector& u) { return radius * u.norm(); };
  b.contact_ = [radius](const Vector& u) { return Vector(radius * unit(u)); };
  b.exact_volume_ = lowdim::unit_ball_volume(dim) * std::pow(radius, dim);
  return b;
}

ConvexBody ConvexBody::cube(int dim, double half_side) {
  if (dim < 1 || dim > 20)
    throw std::invalid_argument("cube body: dimension must be in [1, 20]");
  Matrix verts(dim, 1 << dim);
  for (int s = 0; s < (1 << dim); ++s)
    for (int i = 0; i < dim; ++i)
      verts(i, s) = ((s >> i) & 1) ? half_side : -half_side;
  ConvexBody b = from_vertices(std::move(verts), true);
  lowdim::Halfspaces h;
  h.a = Matrix::Zero(2 * dim, dim);
  h.b = Vector::Constant(2 * dim, half_side);
  for (int i = 0; i < dim; ++i) {
    h.a(2 * i, i) = 1.0;
    h.a(2 * i + 1, i) = -1.0;
  }
  b.hrep_ = std::move(h);
  b.exact_volume_ = std::pow(2.0 * half_side, dim);
  return b;
}

ConvexBody ConvexBody::cross_polytope(int dim, double radius) {
  if (dim < 1 || dim > 20)
    throw std::invalid_argument("cross polytope: dimension must be in [1, 20]");
  Matrix verts = Matrix::Zero(dim, 2 * dim);
  for (int i = 0; i < dim; ++i) {
    verts(i, 2 * i) = radius;
    verts(i, 2 * i + 1) = -radius;
  }
  ConvexBody b = from_vertices(std::move(verts), true);
  if (dim <= 16) {
    lowdim::Halfspaces h;
    h.a = Matrix::Zero(1 << dim, dim);
    h.b = Vector::Constant(1 << dim, radius);
    for (int s = 0; s < (1 << dim); ++s)
      for (int i = 0; i < dim; ++i) h.a(s, i) = ((s >> i) & 1) ? 1.0 : -1.0;
    b.hrep_ = std::move(h);
  }
  b.exact_volume_ =
      std::exp(dim * std::log(2.0 * radius) - std::lgamma(dim + 1.0));
  return b;
}

double ConvexBody::support(const Vector& u) const {
  if (u.size() != dim_) throw std::invalid_argument("support: bad direction");
  return support_(u);
}

EstimateWithCI ConvexBody::support_ci(const Vector& u) const {
  if (support_ci_) return support_ci_(u);
  EstimateWithCI est;
  est.value = support(u);
  est.se = 0.0;
  est.method = "exact";
  return est;
}

Vector ConvexBody::contact(const Vector& u) const {
  if (contact_) return contact_(u);
  // Central-difference support gradient; Euler homogeneity puts the gradient
  // on the boundary.
  const Vector un = unit(u);
  const double h = 1e-5;
  Vector g(dim_);
  for (int i = 0; i < dim_; ++i) {
    Vector up = un, dn = un;
    up(i) += h;
    dn(i) -= h;
    g(i) = (support_(up) - support_(dn)) / (2.0 * h);
  }
  return g;
}

bool ConvexBody::has_contact() const { return static_cast<bool>(contact_); }

std::string ConvexBody::to_text() const {
  std::ostringstream out;
  if (vrep_) {
    out << "vertices " << dim_ << ' ' << vrep_->cols() << '\n';
    for (int j = 0; j < vrep_->cols(); ++j) {
      for (int i = 0; i < dim_; ++i) {
        if (i) out << ' ';
        out << io::format_double((*vrep_)(i, j));
      }
      out << '\n';
    }
    return out.str();
  }
  if (hrep_) {
    out << "halfspaces " << dim_ << ' ' << hrep_->count() << '\n';
    for (int i = 0; i < hrep_->count(); ++i) {
      for (int j = 0; j < dim_; ++j) out << io::format_double(hrep_->a(i, j)) << ' ';
      out << io::format_double(hrep_->b(i)) << '\n';
    }
    return out.str();
  }
  if (ball_radius_) {
    out << "ball " << dim_ << ' ' << io::format_double(*ball_radius_) << '\n';
    return out.str();
  }
  throw std::logic_error("body has no exact representation to serialize");
}

// ---------------------------------------------------------------- Z_q ------

EstimateWithCI zq_support(const measures::Measure& mu, double q,
                          const Vector& y, std::int64_t n_samples,
                          RngStream& rng) {
  if (q < 1.0 || q > 64.0)
    throw std::invalid_argument("zq_support: q must lie in [1, 64]");
  std::vector<double> pow_q(n_samples);
  for (std::int64_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    const double t = std::abs(mu.sample(sub).dot(y));
    pow_q[i] = std::pow(t, q);
  }
  auto [mean, se] = stats::mean_se(pow_q);
  EstimateWithCI est;
  est.n = n_samples;
  est.seed = rng.key();
  est.method = "zq-moment";
  if (mean <= 0.0) {
    est.value = 0.0;
    est.se = 0.0;
    return est;
  }
  est.value = std::pow(mean, 1.0 / q);
  est.se = est.value / (q * mean) * se;
  return est;
}

namespace {

struct ZqCacheEntry {
  double h;
  double se;
  Vector contact;
};

struct ZqCache {
  std::mutex lock;
  std::unordered_map<std::uint64_t, ZqCacheEntry> entries;
};

/// One pass over the direction's own substream: support value, stderr and
/// the moment-weighted contact point (the support gradient).
ZqCacheEntry zq_evaluate(const measures::Measure& mu, double q,
                         std::int64_t n_samples, const RngStream& root,
                         const Vector& y_unit) {
  if (n_samples < 2)
    throw std::invalid_argument("zq_body: need at least 2 samples");
  const std::uint64_t dir_key =
      io::fnv1a64(y_unit.data(), sizeof(double) * y_unit.size());
  RngStream rng = root.child(dir_key);
  const int d = mu.dim();
  double mean_q = 0.0;
  double m2 = 0.0;
  Vector grad_acc = Vector::Zero(d);
  for (std::int64_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    const Vector x = mu.sample(sub);
    const double t = x.dot(y_unit);
    const double a = std::abs(t);
    const double powq = std::pow(a, q);
    const double delta = powq - mean_q;
    mean_q += delta / static_cast<double>(i + 1);
    m2 += delta * (powq - mean_q);
    if (a > 0.0)
      grad_acc += std::pow(a, q - 1.0) * (t >= 0 ? 1.0 : -1.0) * x;
  }
  ZqCacheEntry e;
  if (mean_q <= 0.0) {
    e.h = 0.0;
    e.se = 0.0;
    e.contact = Vector::Zero(d);
    return e;
  }
  const double se_mean =
      std::sqrt(m2 / static_cast<double>(n_samples - 1) /
                static_cast<double>(n_samples));
  e.h = std::pow(mean_q, 1.0 / q);
  e.se = e.h / (q * mean_q) * se_mean;
  // grad h = E[|t|^{q-1} sign(t) x] * mean_q^{1/q - 1}
  e.contact = (grad_acc / static_cast<double>(n_samples)) *
              std::pow(mean_q, 1.0 / q - 1.0);
  return e;
}

}  // namespace

ConvexBody zq_body(const measures::Measure& mu, double q,
                   std::int64_t n_samples, const RngStream& rng) {
  if (q < 1.0 || q > 64.0)
    throw std::invalid_argument("zq_body: q must lie in [1, 64]");
  auto cache = std::make_shared<ZqCache>();
  // Directions are canonicalized up to sign: the body is symmetric by
  // definition, so +-u share one moment estimate and the reported support
  // is exactly even.
  auto lookup = [cache, mu, q, n_samples, rng](const Vector& u) {
    Vector y = unit(u);
    bool flipped = false;
    for (int i = 0; i < y.size(); ++i) {
      if (y(i) > 0.0) break;
      if (y(i) < 0.0) {
        y = -y;
        flipped = true;
        break;
      }
    }
    const std::uint64_t key = io::fnv1a64(y.data(), sizeof(double) * y.size());
    ZqCacheEntry e;
    bool found = false;
    {
      std::lock_guard<std::mutex> g(cache->lock);
      auto it = cache->entries.find(key);
      if (it != cache->entries.end()) {
        e = it->second;
        found = true;
      }
    }
    if (!found) {
      e = zq_evaluate(mu, q, n_samples, rng, y);
      std::lock_guard<std::mutex> g(cache->lock);
      cache->entries.emplace(key, e);
    }
    if (flipped) e.contact = -e.contact;
    return e;
  };
  auto support = [lookup](const Vector& u) {
    return lookup(u).h * u.norm();
  };
  auto contact = [lookup](const Vector& u) { return lookup(u).contact; };
  auto support_ci = [lookup, n_samples, rng](const Vector& u) {
    const ZqCacheEntry e = lookup(u);
    EstimateWithCI est;
    est.value = e.h * u.norm();
    est.se = e.se * u.norm();
    est.n = n_samples;
    est.seed = rng.key();
    est.method = "zq-moment";
    return est;
  };
  return ConvexBody::from_support(mu.dim(), true, support, contact,
                                  support_ci);
}

// ------------------------------------------------- projection / section ----

ConvexBody project_body(const ConvexBody& k, const grassmann::Subspace& f) {
  if (k.dim() != f.n())
    throw std::invalid_argument("project_body: dimension mismatch");
  if (k.ball_radius()) return ConvexBody::ball(f.k(), *k.ball_radius());
  if (k.vrep())
    return ConvexBody::from_vertices(f.frame().transpose() * (*k.vrep()),
                                     k.symmetric());
  const Matrix frame = f.frame();
  auto base_support = [k, frame](const Vector& y) {
    return k.support(frame * y);
  };
  ConvexBody::ContactFn contact;
  if (k.has_contact())
    contact = [k, frame](const Vector& y) {
      return Vector(frame.transpose() * k.contact(frame * y));
    };
  ConvexBody::SupportCiFn ci = [k, frame](const Vector& y) {
    return k.support_ci(frame * y);
  };
  return ConvexBody::from_support(f.k(), k.symmetric(), base_support, contact,
                                  ci);
}

ConvexBody section_body(const ConvexBody& k, const grassmann::Subspace& f) {
  if (k.dim() != f.n())
    throw std::invalid_argument("section_body: dimension mismatch");
  if (k.ball_radius()) return ConvexBody::ball(f.k(), *k.ball_radius());
  if (!k.hrep())
    throw std::invalid_argument(
        "section_body: halfspace representation required");
  lowdim::Halfspaces h;
  h.a = k.hrep()->a * f.frame();
  h.b = k.hrep()->b;
  return ConvexBody::from_halfspaces(std::move(h), k.symmetric());
}

double volume_exact(const ConvexBody& k) {
  if (k.ball_radius())
    return lowdim::unit_ball_volume(k.dim()) *
           std::pow(*k.ball_radius(), k.dim());
  if (k.exact_volume()) return *k.exact_volume();
  if (k.dim() > 3)
    throw std::invalid_argument("volume_exact: dimension must be <= 3");
  if (k.vrep()) return lowdim::hull_volume(*k.vrep());
  if (k.hrep()) return lowdim::hpoly_volume(*k.hrep());
  throw std::invalid_argument("volume_exact: no exact representation");
}

// ----------------------------------------------------------- directions ----

Matrix direction_set(int dim, int count, const RngStream& rng) {
  Matrix dirs(dim, count);
  int c = 0;
  for (int i = 0; i < dim && c < count; ++i) {
    Vector e = Vector::Zero(dim);
    e(i) = 1.0;
    dirs.col(c++) = e;
    if (c < count) dirs.col(c++) = -e;
  }
  if (dim >= 2 && dim <= 6) {
    const int diag = std::min(1 << (dim - 1), 64);
    for (int s = 0; s < diag && c < count; ++s) {
      Vector v(dim);
      v(0) = 1.0;
      for (int i = 1; i < dim; ++i) v(i) = ((s >> (i - 1)) & 1) ? 1.0 : -1.0;
      dirs.col(c++) = v / v.norm();
    }
  }
  // Kronecker sequence on [0,1)^dim pushed through the normal quantile.
  double phi = 1.5;
  for (int it = 0; it < 64; ++it)
    phi = std::pow(1.0 + phi, 1.0 / (dim + 1.0));
  Vector alpha(dim), shift(dim);
  RngStream local = rng.child(0xD19);
  double a = 1.0;
  for (int i = 0; i < dim; ++i) {
    a /= phi;
    alpha(i) = a;
    shift(i) = local.uniform();
  }
  for (std::int64_t idx = 0; c < count; ++idx) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) {
      double u = std::fmod(shift(i) + (idx + 1) * alpha(i), 1.0);
      u = std::clamp(u, 1e-9, 1.0 - 1e-9);
      v(i) = stats::normal_quantile(u);
    }
    const double nrm = v.norm();
    if (nrm < 1e-12) continue;
    dirs.col(c++) = v / nrm;
  }
  return dirs;
}

// ------------------------------------------------------- volume bracket ----

VolumeBracket volume_sandwich(const ConvexBody& k, int n_directions,
                              const RngStream& rng, double z_ci) {
  const int d = k.dim();
  if (d > 8)
    throw std::invalid_argument("volume_sandwich: dimension must be <= 8");
  if (k.exact_volume()) {
    // Degenerate bracket for closed-form bodies.
    return {*k.exact_volume(), *k.exact_volume(), "closed-form"};
  }
  if (d <= 3 && k.vrep()) {
    const double v = lowdim::hull_volume(*k.vrep());
    return {v, v, "exact-vrep"};
  }

  const Matrix dirs = direction_set(d, n_directions, rng);
  // Vertex enumeration cost grows fast with the constraint count, so the
  // outer polytope uses a direction prefix; dropping constraints only
  // enlarges it, which keeps the upper bound valid and still monotone in M.
  const int outer_cap = d <= 2 ? 400 : (d == 3 ? 120 : n_directions);
  const int n_outer = std::min(n_directions, outer_cap);
  lowdim::Halfspaces outer;
  outer.a = Matrix(n_outer, d);
  outer.b = Vector(n_outer);
  Matrix contacts(d, n_directions);
  bool have_contacts = k.has_contact();
  for (int i = 0; i < n_directions; ++i) {
    const Vector u = dirs.col(i);
    const EstimateWithCI h = k.support_ci(u);
    if (i < n_outer) {
      outer.a.row(i) = u.transpose();
      outer.b(i) = h.value + z_ci * h.se;
    }
    if (have_contacts) {
      Vector p = k.contact(u);
      // Shrink noisy contacts toward the origin so they stay inside.
      if (h.se > 0.0 && h.value > 0.0)
        p *= std::max(0.0, 1.0 - z_ci * h.se / h.value);
      contacts.col(i) = p;
    }
  }

  VolumeBracket out;
  if (d <= 3) {
    out.upper = lowdim::hpoly_volume(outer);
    if (have_contacts) {
      Matrix pts = contacts;
      if (k.symmetric()) {
        pts.conservativeResize(d, 2 * n_directions);
        pts.rightCols(n_directions) = -contacts;
      }
      out.lower = lowdim::hull_volume(pts);
    }
    out.method = "exact-support-polytopes";
    if (out.lower > out.upper) std::swap(out.lower, out.upper);
    return out;
  }

  // Radial Monte Carlo for the outer halfspace body; the estimate is
  // CI-inflated on the high side. The inner bound is the best inscribed
  // cross-polytope of the contact hull evaluated over power-of-two prefixes
  // (so refinement never loses ground).
  RngStream radial = rng.child(0x0A1);
  const int n_radial = 4096;
  std::vector<double> vols(n_radial);
  const double omega = lowdim::unit_ball_volume(d);
  for (int i = 0; i < n_radial; ++i) {
    RngStream sub = radial.child(static_cast<std::uint64_t>(i));
    Vector theta(d);
    for (int j = 0; j < d; ++j) theta(j) = sub.normal();
    theta.normalize();
    const double rho = lowdim::hpoly_radial(outer, theta);
    if (!std::isfinite(rho)) {
      vols[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    vols[i] = omega * std::pow(rho, d);
  }
  std::vector<double> clean;
  clean.reserve(vols.size());
  for (double v : vols)
    if (std::isfinite(v)) clean.push_back(v);
  if (clean.empty())
    throw std::runtime_error("volume_sandwich: outer body unbounded");
  auto [mean, se] = stats::mean_se(clean);
  out.upper = mean + z_ci * se;
  out.lower = 0.0;
  if (have_contacts && k.symmetric()) {
    for (int m = 2; m <= n_directions; m *= 2)
      out.lower = std::max(out.lower, lowdim::symmetric_cross_polytope_lower(
                                          contacts.leftCols(m)));
    out.lower = std::max(out.lower, lowdim::symmetric_cross_polytope_lower(contacts));
  }
  out.method = "radial-mc+cross-polytope";
  if (out.lower > out.upper) out.lower = out.upper;
  return out;
}

// ----------------------------------------------------------------- radii ---

Radii radii(const ConvexBody& k, int n_directions, const RngStream& rng) {
  if (!k.symmetric())
    throw std::invalid_argument("radii: symmetric body required");
  const Matrix dirs = direction_set(k.dim(), n_directions, rng);
  Radii out;
  out.circumradius = 0.0;
  out.inradius = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dirs.cols(); ++i) {
    const double h = k.support(dirs.col(i));
    out.circumradius = std::max(out.circumradius, h);
    out.inradius = std::min(out.inradius, h);
  }
  return out;
}

// ------------------------------------------------------- Rogers-Shephard ---

ProjectionSectionReport rogers_shephard_check(const ConvexBody& k,
                                              const grassmann::Subspace& f) {
  const int n = k.dim();
  const int kk = f.k();
  if (kk > 3 || n - kk > 3)
    throw std::invalid_argument(
        "rogers_shephard_check: need k <= 3 and n-k <= 3");
  ProjectionSectionReport rep;
  rep.proj_volume = volume_exact(project_body(k, f));
  rep.section_volume = volume_exact(section_body(k, f.complement()));
  rep.body_volume = volume_exact(k);
  rep.binom = binomial(n, kk);
  const double prod = rep.proj_volume * rep.section_volume;
  rep.upper_ratio = prod / (rep.binom * rep.body_volume);
  rep.lower_ratio = prod / rep.body_volume;
  rep.upper_ok = rep.upper_ratio <= 1.0 + 1e-9;
  rep.lower_ok = rep.lower_ratio >= 1.0 - 1e-9;
  return rep;
}

void write_support_table(const ConvexBody& k, const Matrix& directions,
                         const std::string& path) {
  io::CsvWriter csv(path);
  std::vector<std::string> header;
  for (int i = 0; i < k.dim(); ++i) header.push_back("u" + std::to_string(i));
  header.insert(header.end(), {"h", "stderr", "N"});
  csv.header(header);
  for (int j = 0; j < directions.cols(); ++j) {
    const EstimateWithCI h = k.support_ci(directions.col(j));
    std::vector<std::string> row;
    for (int i = 0; i < k.dim(); ++i)
      row.push_back(io::format_double(directions(i, j)));
    row.push_back(io::format_double(h.value));
    row.push_back(io::format_double(h.se));
    row.push_back(std::to_string(h.n));
    csv.row(row);
  }
}

}  // namespace grasslab::geometry
