#include "grasslab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "grasslab/stats.hpp"

namespace grasslab::estimators {

namespace {

using grassmann::Subspace;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& xs) {
  const double peak = *std::max_element(xs.begin(), xs.end());
  if (peak == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - peak);
  return peak + std::log(acc);
}

/// Nelder-Mead ascent on f, used only as a local polish step.
Vector nelder_mead_max(const std::function<double(const Vector&)>& f,
                       const Vector& x0, double step, int iters) {
  const int d = static_cast<int>(x0.size());
  std::vector<Vector> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (int i = 0; i < d; ++i) pts[i + 1](i) += step;
  for (int i = 0; i <= d; ++i) vals[i] = f(pts[i]);
  auto order = [&] {
    for (int i = 0; i <= d; ++i)
      for (int j = i + 1; j <= d; ++j)
        if (vals[j] > vals[i]) {
          std::swap(vals[i], vals[j]);
          std::swap(pts[i], pts[j]);
        }
  };
  for (int it = 0; it < iters; ++it) {
    order();
    Vector centroid = Vector::Zero(d);
    for (int i = 0; i < d; ++i) centroid += pts[i];
    centroid /= d;
    const Vector reflect = centroid + (centroid - pts[d]);
    const double fr = f(reflect);
    if (fr > vals[0]) {
      const Vector expand = centroid + 2.0 * (centroid - pts[d]);
      const double fe = f(expand);
      if (fe > fr) {
        pts[d] = expand;
        vals[d] = fe;
      } else {
        pts[d] = reflect;
        vals[d] = fr;
      }
    } else if (fr > vals[d - 1]) {
      pts[d] = reflect;
      vals[d] = fr;
    } else {
      const Vector contract = centroid + 0.5 * (pts[d] - centroid);
      const double fc = f(contract);
      if (fc > vals[d]) {
        pts[d] = contract;
        vals[d] = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          vals[i] = f(pts[i]);
        }
      }
    }
    if ((pts[0] - pts[d]).norm() < 1e-10) break;
  }
  order();
  return pts[0];
}

/// log det of the covariance plus a stderr for the full estimator value,
/// obtained by batching when the covariance is empirical.
struct CovFactor {
  double log_det = 0.0;
  bool exact = true;
};

CovFactor covariance_log_det(const Measure& mu, std::int64_t n_samples,
                             const RngStream& rng) {
  CovFactor out;
  if (const auto cov = mu.covariance()) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(*cov);
    out.log_det = eig.eigenvalues().array().log().sum();
    return out;
  }
  out.exact = false;
  const auto est = measures::covariance_estimate(mu, n_samples, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(est.cov);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("covariance estimate not positive definite");
  out.log_det = eig.eigenvalues().array().log().sum();
  return out;
}

double locate_log_sup(const Measure& mu, std::int64_t n_scan, const RngStream& rng,
                      double* log_f0_out) {
  const int d = mu.dim();
  Vector best = Vector::Zero(d);
  double best_val = mu.log_density(best);
  if (log_f0_out) *log_f0_out = best_val;
  for (std::int64_t i = 0; i < n_scan; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    const Vector x = mu.sample(sub);
    const double v = mu.log_density(x);
    if (v > best_val) {
      best_val = v;
      best = x;
    }
  }
  auto objective = [&](const Vector& x) { return mu.log_density(x); };
  const Vector polished = nelder_mead_max(objective, best, 0.05, 120);
  return std::max(best_val, mu.log_density(polished));
}

}  // namespace

std::string l_method_name(LMethod m) {
  return m == LMethod::kDensity ? "density" : "volumetric";
}

LMethod l_method_from_name(const std::string& name) {
  if (name == "density") return LMethod::kDensity;
  if (name == "volumetric") return LMethod::kVolumetric;
  throw std::invalid_argument("unknown L method: " + name);
}

EstimateWithCI isotropic_constant_density(const Measure& mu,
                                          const EstimatorBudget& budget,
                                          const RngStream& rng) {
  if (!mu.has_density())
    throw std::invalid_argument("isotropic_constant_density: no density");
  const int n = mu.dim();
  RngStream scan = rng.child(1);
  double log_f0 = kNegInf;
  const double log_sup = locate_log_sup(mu, 2048, scan, &log_f0);
  // Fradelizi sanity gate for a centered log-concave density.
  if (log_f0 == kNegInf || log_sup < log_f0 - 1e-9 ||
      log_sup > log_f0 + n + 1e-3)
    throw std::runtime_error(
        "isotropic_constant_density: sup/center bracket violated");

  RngStream cov_rng = rng.child(2);
  const CovFactor cov = covariance_log_det(mu, budget.n_samples, cov_rng);
  EstimateWithCI est;
  est.value = std::exp(log_sup / n + cov.log_det / (2.0 * n));
  est.seed = rng.key();
  est.n = budget.n_samples;
  est.method = cov.exact ? "density/exact-cov" : "density/estimated-cov";
  if (!cov.exact) {
    // Batched covariance determinants give the stderr.
    std::vector<double> batch_vals;
    const std::int64_t per = std::max<std::int64_t>(
        200, budget.n_samples / std::max(1, budget.n_batches));
    for (int b = 0; b < budget.n_batches; ++b) {
      RngStream brng = rng.child(100 + b);
      const CovFactor bc = covariance_log_det(mu, per, brng);
      batch_vals.push_back(std::exp(log_sup / n + bc.log_det / (2.0 * n)));
    }
    auto [m, se] = stats::mean_se(batch_vals);
    (void)m;
    est.se = se;
  }
  return est;
}

EstimateWithCI isotropic_constant_volumetric(const Measure& nu,
                                             const EstimatorBudget& budget,
                                             const RngStream& rng) {
  const int m = nu.dim();
  if (m > 8)
    throw std::invalid_argument(
        "isotropic_constant_volumetric: dimension must be <= 8");
  const geometry::ConvexBody zm =
      geometry::zq_body(nu, static_cast<double>(m), budget.n_samples,
                        rng.child(1));
  const geometry::VolumeBracket vb =
      geometry::volume_sandwich(zm, budget.n_directions, rng.child(2));
  EstimateWithCI est;
  est.lo = vb.upper > 0.0 ? std::pow(vb.upper, -1.0 / m)
                          : std::numeric_limits<double>::infinity();
  est.hi = vb.lower > 0.0 ? std::pow(vb.lower, -1.0 / m)
                          : std::numeric_limits<double>::infinity();
  est.value = std::isfinite(est.hi) ? std::sqrt(est.lo * est.hi) : est.lo;
  est.se = std::isfinite(est.hi) ? 0.25 * (est.hi - est.lo) : 0.0;
  est.n = budget.n_samples;
  est.seed = rng.key();
  est.method = "volumetric-bracket/" + vb.method;
  return est;
}

EstimateWithCI marginal_L(const Measure& mu, const grassmann::Subspace& f,
                          LMethod method, const EstimatorBudget& budget,
                          const RngStream& rng) {
  const int k = f.k();
  if (method == LMethod::kDensity) {
    RngStream fiber_rng = rng.child(1);
    const EstimateWithCI f0 =
        measures::marginal_density_at_zero(mu, f, budget.n_samples, fiber_rng);
    double log_det_marg = 0.0;
    if (const auto cov = mu.covariance()) {
      const Matrix cm = f.frame().transpose() * (*cov) * f.frame();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(cm);
      log_det_marg = eig.eigenvalues().array().log().sum();
    } else {
      RngStream cov_rng = rng.child(2);
      const auto ce = measures::covariance_estimate(
          measures::marginal(mu, f), budget.n_samples, cov_rng);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(ce.cov);
      log_det_marg = eig.eigenvalues().array().log().sum();
    }
    EstimateWithCI est;
    est.n = f0.n;
    est.seed = rng.key();
    est.method = "marginal-L/density(" + f0.method + ")";
    if (f0.value <= 0.0) {
      est.method += ";degenerate";
      return est;
    }
    const double det_factor = std::exp(log_det_marg / (2.0 * k));
    est.value = std::pow(f0.value, 1.0 / k) * det_factor;
    est.se = est.value * f0.se / (k * f0.value);
    est.lo = est.value;
    est.hi = est.value * std::exp(1.0);  // Fradelizi upper side of the sup
    return est;
  }
  if (k > 8)
    throw std::invalid_argument("marginal_L volumetric: k must be <= 8");
  const Measure nu = measures::marginal(mu, f);
  EstimateWithCI est = isotropic_constant_volumetric(nu, budget, rng);
  est.method = "marginal-L/" + est.method;
  return est;
}

EstimateWithCI a_k_average(const Measure& mu, int k, int n_subspaces,
                           std::int64_t n_samples, const RngStream& rng) {
  if (!mu.has_density())
    throw std::invalid_argument("a_k_average: closed-form density required");
  const int n = mu.dim();
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("a_k_average: need 1 <= k <= n-1");
  std::vector<double> log_fiber(n_subspaces);
  std::int64_t degenerate = 0;
  for (int j = 0; j < n_subspaces; ++j) {
    RngStream frng = rng.child(2 * j);
    RngStream irng = rng.child(2 * j + 1);
    const Subspace f = grassmann::haar_sample(n, k, frng);
    const EstimateWithCI fiber =
        measures::marginal_density_at_zero(mu, f, n_samples, irng);
    if (fiber.value <= 0.0) {
      ++degenerate;
      log_fiber[j] = kNegInf;
      continue;
    }
    log_fiber[j] = std::log(fiber.value);
  }
  if (degenerate > 0)
    throw std::runtime_error("a_k_average: " + std::to_string(degenerate) +
                             " fiber estimates hit zero mass");
  std::vector<double> powered(n_subspaces);
  for (int j = 0; j < n_subspaces; ++j) powered[j] = n * log_fiber[j];
  const double lse = log_sum_exp(powered);
  EstimateWithCI est;
  est.value = std::exp((lse - std::log(n_subspaces)) / (k * n));
  est.n = n_subspaces;
  est.seed = rng.key();
  est.method = "a_k/log-space";
  // Batched outer loop for the stderr.
  const int batches = std::min(10, n_subspaces);
  std::vector<double> bvals;
  const int per = n_subspaces / batches;
  for (int b = 0; b < batches; ++b) {
    std::vector<double> part(powered.begin() + b * per,
                             powered.begin() + (b + 1) * per);
    bvals.push_back(std::exp((log_sum_exp(part) - std::log(per)) / (k * n)));
  }
  auto [m, se] = stats::mean_se(bvals);
  (void)m;
  est.se = se;
  return est;
}

namespace {

/// Mean of exp(power * log vol_j) over Haar subspaces, kept in log scale:
/// returns log of the mean plus a batch stderr for that log value.
struct LogMean {
  double log_mean = 0.0;
  double log_se = 0.0;
};

LogMean quermass_core(const geometry::ConvexBody& body, int k,
                      int n_subspaces, double power, const RngStream& rng,
                      bool sections) {
  const int n = body.dim();
  std::vector<double> terms(n_subspaces);
  for (int j = 0; j < n_subspaces; ++j) {
    RngStream frng = rng.child(static_cast<std::uint64_t>(j));
    const Subspace f = grassmann::haar_sample(n, k, frng);
    double vol;
    if (sections) {
      vol = geometry::volume_exact(
          geometry::section_body(body, f.complement()));
    } else {
      const geometry::ConvexBody proj = geometry::project_body(body, f);
      if (k <= 3 && (proj.vrep() || proj.ball_radius())) {
        vol = geometry::volume_exact(proj);
      } else {
        const auto vb = geometry::volume_sandwich(proj, 256, rng.child(j));
        vol = std::sqrt(std::max(vb.lower, 1e-300) * vb.upper);
      }
    }
    if (!(vol > 0.0))
      throw std::runtime_error("quermassintegral: zero projection/section");
    terms[j] = power * std::log(vol);
  }
  LogMean out;
  out.log_mean = log_sum_exp(terms) - std::log(n_subspaces);
  const int batches = std::min(10, n_subspaces);
  const int per = n_subspaces / batches;
  std::vector<double> bvals;
  for (int b = 0; b < batches; ++b) {
    std::vector<double> part(terms.begin() + b * per,
                             terms.begin() + (b + 1) * per);
    bvals.push_back(log_sum_exp(part) - std::log(per));
  }
  out.log_se =
      stats::sample_std(bvals) / std::sqrt(static_cast<double>(batches));
  return out;
}

}  // namespace

EstimateWithCI affine_quermassintegral(const geometry::ConvexBody& k_body,
                                       int k, int n_subspaces,
                                       const RngStream& rng) {
  const int n = k_body.dim();
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("affine_quermassintegral: bad k");
  const LogMean core = quermass_core(k_body, k, n_subspaces,
                                     -static_cast<double>(n), rng, false);
  EstimateWithCI est;
  est.value = std::exp(-core.log_mean / (k * n));
  est.se = est.value * core.log_se / (k * n);
  est.n = n_subspaces;
  est.seed = rng.key();
  est.method = "affine-quermass/log-space";
  return est;
}

EstimateWithCI dual_affine_quermassintegral(const geometry::ConvexBody& k_body,
                                            int k, int n_subspaces,
                                            const RngStream& rng) {
  const int n = k_body.dim();
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("dual_affine_quermassintegral: bad k");
  if (n - k > 3 && !k_body.ball_radius())
    throw std::invalid_argument(
        "dual_affine_quermassintegral: section dimension above 3");
  const LogMean core = quermass_core(k_body, k, n_subspaces,
                                     static_cast<double>(n), rng, true);
  EstimateWithCI est;
  est.value = std::exp(core.log_mean / (k * n));
  est.se = est.value * core.log_se / (k * n);
  est.n = n_subspaces;
  est.seed = rng.key();
  est.method = "dual-affine-quermass/log-space";
  return est;
}

QvResult qv_estimate(const Measure& mu, double beta,
                     const EstimatorBudget& budget, const RngStream& rng) {
  const int n = mu.dim();
  if (n > 6)
    throw std::invalid_argument("qv_estimate: dimension must be <= 6");
  if (beta < 1.0) throw std::invalid_argument("qv_estimate: beta >= 1");
  RngStream cov_rng = rng.child(0xC0);
  const CovFactor cov = covariance_log_det(mu, budget.n_samples, cov_rng);
  const double det_factor = std::exp(cov.log_det / (2.0 * n));

  QvResult out;
  out.beta = beta;
  for (int q = 1; q <= n; ++q) {
    const geometry::ConvexBody zq =
        geometry::zq_body(mu, q, budget.n_samples, rng.child(q));
    const geometry::VolumeBracket vb = geometry::volume_sandwich(
        zq, budget.n_directions, rng.child(100 + q));
    QvRow row;
    row.q = q;
    row.vr_lower = vb.lower > 0 ? std::pow(vb.lower, 1.0 / n) : 0.0;
    row.vr_upper = std::pow(vb.upper, 1.0 / n);
    row.threshold =
        std::sqrt(static_cast<double>(q) / n) / beta * det_factor;
    if (row.vr_lower >= row.threshold)
      row.status = 1;
    else if (row.vr_upper < row.threshold)
      row.status = -1;
    else {
      row.status = 0;
      out.any_indeterminate = true;
    }
    if (row.status == 1) out.q_v = q;
    out.profile.push_back(row);
  }
  return out;
}

EstimateWithCI iq_moment(const Measure& mu, double q, std::int64_t n_samples,
                         const RngStream& rng) {
  const int n = mu.dim();
  if (q < -(n - 1) / 2.0)
    throw std::invalid_argument(
        "iq_moment: q below the -(n-1)/2 variance guard");
  if (std::abs(q) < 1e-12)
    throw std::invalid_argument("iq_moment: q = 0 not defined");
  std::vector<double> powered(n_samples);
  for (std::int64_t i = 0; i < n_samples; ++i) {
    RngStream sub = rng.child(static_cast<std::uint64_t>(i));
    powered[i] = std::pow(mu.sample(sub).norm(), q);
  }
  auto [mean, se] = stats::mean_se(powered);
  EstimateWithCI est;
  est.n = n_samples;
  est.seed = rng.key();
  est.method = "iq-moment";
  est.value = std::pow(mean, 1.0 / q);
  est.se = std::abs(1.0 / q) * std::pow(mean, 1.0 / q - 1.0) * se;
  return est;
}

std::optional<double> q_minus_c_estimate(const Measure& mu, double delta,
                                         std::int64_t n_samples,
                                         const RngStream& rng) {
  if (delta <= 1.0)
    throw std::invalid_argument("q_minus_c_estimate: delta must exceed 1");
  const int n = mu.dim();
  const double cap = (n - 1) / 2.0;
  const double p_min = 1e-3;
  RngStream i2_rng = rng.child(1);
  const EstimateWithCI i2 = iq_moment(mu, 2.0, n_samples, i2_rng);
  const double threshold = (i2.value + 2.0 * i2.se) / delta;

  std::uint64_t probe = 0;
  auto certified = [&](double p) {
    RngStream prng = rng.child(1000 + probe++);
    const EstimateWithCI est = iq_moment(mu, -p, n_samples, prng);
    return est.value - 2.0 * est.se >= threshold;
  };
  if (!certified(p_min)) return std::nullopt;
  if (certified(cap)) return cap;
  double lo = p_min, hi = cap;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (certified(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace grasslab::estimators
