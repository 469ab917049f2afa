#include "grasslab/grassmann.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "grasslab/io.hpp"

namespace grasslab::grassmann {

namespace {

constexpr double kFrameTol = 1e-10;

Matrix gaussian_matrix(int rows, int cols, RngStream& rng) {
  Matrix g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g(i, j) = rng.normal();
  return g;
}

/// Thin QR with the R diagonal forced positive. The sign fix makes the
/// result a deterministic function of the input columns.
Matrix orthonormalize(const Matrix& columns) {
  Eigen::HouseholderQR<Matrix> qr(columns);
  const int n = static_cast<int>(columns.rows());
  const int k = static_cast<int>(columns.cols());
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

void require_compatible(const Subspace& e, const Subspace& f,
                        const char* what) {
  if (e.n() != f.n() || e.k() != f.k()) {
    throw std::invalid_argument(std::string(what) +
                                ": subspaces must share (n, k)");
  }
}

/// Sines and cosines of the principal angles, both ordered by ascending
/// angle. Cosines come from the SVD of E^T F, sines from the SVD of the
/// complement-projected frame, which keeps small angles fully accurate.
void principal_sin_cos(const Subspace& e, const Subspace& f,
                       std::vector<double>& sines,
                       std::vector<double>& cosines) {
  const int k = e.k();
  const Matrix m = e.frame().transpose() * f.frame();
  Eigen::JacobiSVD<Matrix> svd_cos(m);
  const Matrix residual = f.frame() - e.frame() * m;
  Eigen::JacobiSVD<Matrix> svd_sin(residual);
  cosines.resize(k);
  sines.resize(k);
  for (int i = 0; i < k; ++i) {
    // Descending cosines = ascending angles; sines come out descending.
    cosines[i] = std::clamp(svd_cos.singularValues()(i), 0.0, 1.0);
    sines[i] = std::clamp(svd_sin.singularValues()(k - 1 - i), 0.0, 1.0);
  }
}

}  // namespace

std::string metric_name(Metric m) {
  return m == Metric::kSigmaInf ? "sigma_inf" : "d";
}

Metric metric_from_name(const std::string& name) {
  if (name == "sigma_inf") return Metric::kSigmaInf;
  if (name == "d") return Metric::kMinRotation;
  throw std::invalid_argument("unknown metric name: " + name);
}

Subspace::Subspace(int n, Matrix frame) : n_(n), frame_(std::move(frame)) {
  if (n_ < 1 || frame_.rows() != n_ || frame_.cols() < 1 ||
      frame_.cols() > n_ - 1) {
    throw std::invalid_argument("Subspace: need n >= 2 and 1 <= k <= n-1");
  }
  const Matrix gram =
      frame_.transpose() * frame_ -
      Matrix::Identity(frame_.cols(), frame_.cols());
  if (gram.cwiseAbs().maxCoeff() > kFrameTol) {
    throw std::invalid_argument("Subspace: frame columns not orthonormal");
  }
}

Subspace Subspace::from_span(const Matrix& columns) {
  return Subspace(static_cast<int>(columns.rows()), orthonormalize(columns));
}

Subspace Subspace::coordinate(int n, int k) {
  return Subspace(n, Matrix::Identity(n, n).leftCols(k));
}

Matrix Subspace::complement_frame() const {
  // Full QR of the frame; trailing columns of Q span the complement.
  Eigen::HouseholderQR<Matrix> qr(frame_);
  const Matrix q = qr.householderQ();
  return q.rightCols(n_ - k());
}

Subspace Subspace::complement() const {
  return Subspace(n_, complement_frame());
}

std::string Subspace::digest() const {
  return io::digest_bytes(frame_.data(), sizeof(double) * frame_.size());
}

PrincipalAngles principal_angles(const Subspace& e, const Subspace& f) {
  require_compatible(e, f, "principal_angles");
  std::vector<double> sines, cosines;
  principal_sin_cos(e, f, sines, cosines);
  PrincipalAngles out;
  out.angles.resize(sines.size());
  for (std::size_t i = 0; i < sines.size(); ++i)
    out.angles[i] = std::atan2(sines[i], cosines[i]);
  std::sort(out.angles.begin(), out.angles.end());
  return out;
}

double sigma_inf(const Subspace& e, const Subspace& f) {
  require_compatible(e, f, "sigma_inf");
  std::vector<double> sines, cosines;
  principal_sin_cos(e, f, sines, cosines);
  return *std::max_element(sines.begin(), sines.end());
}

double metric_d(const Subspace& e, const Subspace& f) {
  const double theta = principal_angles(e, f).max();
  return 2.0 * std::sin(0.5 * theta);
}

double metric_value(Metric m, const Subspace& e, const Subspace& f) {
  return m == Metric::kSigmaInf ? sigma_inf(e, f) : metric_d(e, f);
}

double metric_diameter(Metric m) {
  return m == Metric::kSigmaInf ? 1.0 : std::sqrt(2.0);
}

Subspace haar_sample(int n, int k, RngStream& rng) {
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("haar_sample: need 1 <= k <= n-1");
  return Subspace(n, orthonormalize(gaussian_matrix(n, k, rng)));
}

Rotation haar_rotation(int n, RngStream& rng) {
  Matrix q = orthonormalize(gaussian_matrix(n, n, rng));
  return Rotation{std::move(q)};
}

Subspace ball_sample(const Subspace& center, double delta, Metric metric,
                     RngStream& rng) {
  const double diam = metric_diameter(metric);
  if (!(delta > 0.0) || delta > diam + 1e-12)
    throw std::invalid_argument("ball_sample: delta outside (0, diameter]");
  const int n = center.n();
  const int k = center.k();
  // Angle radius whose geodesic endpoint sits exactly at metric value delta.
  const double d_eff = std::min(delta, diam);
  const double t_max = (metric == Metric::kSigmaInf)
                           ? std::asin(std::min(d_eff, 1.0))
                           : 2.0 * std::asin(0.5 * d_eff);
  const Matrix comp = center.complement_frame();
  const double dim = static_cast<double>(k) * static_cast<double>(n - k);

  for (int attempt = 0; attempt < 64; ++attempt) {
    const Matrix block = gaussian_matrix(n - k, k, rng);
    const Matrix tangent = comp * block;  // n x k, orthogonal to the center
    Eigen::JacobiSVD<Matrix> svd(tangent,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double top = svd.singularValues()(0);
    if (top <= 0.0) continue;
    const double u = rng.uniform();
    const double radius = t_max * std::pow(u, 1.0 / dim);
    Vector scaled = svd.singularValues() / top * radius;
    Matrix cosd = Matrix::Zero(k, k);
    Matrix sind = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      cosd(i, i) = std::cos(scaled(i));
      sind(i, i) = std::sin(scaled(i));
    }
    const Matrix v = svd.matrixV();
    Matrix moved = center.frame() * v * cosd * v.transpose() +
                   svd.matrixU() * sind * v.transpose();
    Subspace candidate = Subspace::from_span(moved);
    if (metric_value(metric, center, candidate) <= delta * (1.0 + 1e-12))
      return candidate;
  }
  throw std::runtime_error("ball_sample: rejection loop failed to land");
}

EstimateWithCI ball_measure_estimate(const Subspace& center, double delta,
                                     Metric metric, std::int64_t n_samples,
                                     RngStream& rng) {
  if (n_samples < 1000)
    throw std::invalid_argument("ball_measure_estimate: need N >= 1000");
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    const Subspace f = haar_sample(center.n(), center.k(), sub);
    if (metric_value(metric, center, f) <= delta) ++hits;
  }
  const double p =
      static_cast<double>(hits) / static_cast<double>(n_samples);
  EstimateWithCI est;
  est.value = p;
  est.se = std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
  est.n = n_samples;
  est.seed = rng.key();
  est.method = "haar-fraction/" + metric_name(metric);
  return est;
}

int packing_number_estimate(int n, int k, double eps, Metric metric,
                            std::int64_t budget, RngStream& rng) {
  // eps >= 1 degenerates to a single point under diameter normalization.
  if (!(eps > 0.0))
    throw std::invalid_argument("packing_number_estimate: eps must be > 0");
  if (budget < 2)
    throw std::invalid_argument("packing_number_estimate: budget too small");

  // Empirical diameter over random pairs; the metric is then used in
  // normalized form so that eps lives on a diameter-1 scale.
  RngStream diam_rng = rng.child(0xD1A);
  double diam = 0.0;
  const std::int64_t pairs = std::min<std::int64_t>(2000, budget);
  for (std::int64_t i = 0; i < pairs; ++i) {
    const Subspace a = haar_sample(n, k, diam_rng);
    const Subspace b = haar_sample(n, k, diam_rng);
    diam = std::max(diam, metric_value(metric, a, b));
  }
  if (diam <= 0.0) diam = metric_diameter(metric);

  RngStream pick_rng = rng.child(0xACC);
  std::vector<Subspace> kept;
  kept.push_back(haar_sample(n, k, pick_rng));
  for (std::int64_t i = 1; i < budget; ++i) {
    const Subspace cand = haar_sample(n, k, pick_rng);
    bool separated = true;
    for (const Subspace& s : kept) {
      if (metric_value(metric, s, cand) / diam < eps) {
        separated = false;
        break;
      }
    }
    if (separated) kept.push_back(cand);
  }
  return static_cast<int>(kept.size());
}

Rotation rotation_mapping(const Subspace& e, const Subspace& f) {
  require_compatible(e, f, "rotation_mapping");
  const int n = e.n();
  const int k = e.k();
  const Matrix m = e.frame().transpose() * f.frame();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u_vecs = e.frame() * svd.matrixU();
  const Matrix v_vecs = f.frame() * svd.matrixV();

  // Rotate each principal pair inside its own plane. The planes are mutually
  // orthogonal, so the plane rotations commute and add up as corrections.
  Matrix rot = Matrix::Identity(n, n);
  for (int i = 0; i < k; ++i) {
    const double c = std::clamp(svd.singularValues()(i), -1.0, 1.0);
    const double theta = std::acos(c);
    if (theta < 1e-14) continue;
    const Vector u = u_vecs.col(i);
    Vector w = v_vecs.col(i) - c * u;
    const double s = w.norm();
    if (s < 1e-14) continue;
    w /= s;
    rot += std::sin(theta) * (w * u.transpose() - u * w.transpose()) +
           (std::cos(theta) - 1.0) * (u * u.transpose() + w * w.transpose());
  }
  return Rotation{std::move(rot)};
}

std::string to_text(const Subspace& s) {
  std::ostringstream out;
  for (int i = 0; i < s.n(); ++i) {
    for (int j = 0; j < s.k(); ++j) {
      if (j) out << ' ';
      out << io::format_double(s.frame()(i, j));
    }
    out << '\n';
  }
  return out.str();
}

Subspace subspace_from_text(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("subspace_from_text: empty");
  const int n = static_cast<int>(rows.size());
  const int k = static_cast<int>(rows[0].size());
  Matrix frame(n, k);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != k)
      throw std::invalid_argument("subspace_from_text: ragged rows");
    for (int j = 0; j < k; ++j) frame(i, j) = rows[i][j];
  }
  return Subspace(n, std::move(frame));
}

}  // namespace grasslab::grassmann
