#include "grasslab/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "grasslab/estimators.hpp"
#include "grasslab/geometry.hpp"
#include "grasslab/io.hpp"
#include "grasslab/measures.hpp"
#include "grasslab/search.hpp"
#include "grasslab/stats.hpp"

namespace grasslab::runner {

namespace {

using config::RunConfig;
using estimators::EstimatorBudget;
using grassmann::Subspace;
using measures::Measure;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

std::string fmt(double v) { return io::format_double(v); }

/// Compact rendering for human-facing tags and details.
std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

/// Shared per-run context: JSONL record log plus the output inventory.
struct RunContext {
  const RunConfig& cfg;
  io::JsonlWriter records;
  std::vector<std::string> files;
  std::string config_text;

  RunContext(const RunConfig& c, const std::string& dir)
      : cfg(c), records(dir + "/records.jsonl"), config_text(c.to_text()) {
    files.push_back(dir + "/records.jsonl");
  }

  void log(const std::string& tag, const EstimateWithCI& est,
           double wall_ms) {
    nlohmann::json rec;
    rec["tag"] = tag;
    rec["command"] = cfg.command;
    rec["inputs_digest"] = io::digest_string(config_text + "|" + tag);
    rec["seed"] = est.seed;
    rec["method"] = est.method;
    rec["value"] = est.value;
    rec["stderr"] = est.se;
    if (est.has_bracket()) {
      rec["lo"] = est.lo;
      rec["hi"] = est.hi;
    }
    rec["n"] = est.n;
    rec["wall_ms"] = wall_ms;
    records.write(rec);
  }

  void log_value(const std::string& tag, double value,
                 const std::string& method, std::uint64_t seed) {
    EstimateWithCI est;
    est.value = value;
    est.method = method;
    est.seed = seed;
    log(tag, est, 0.0);
  }
};

EstimatorBudget budget_from(const RunConfig& cfg) {
  EstimatorBudget b;
  b.n_samples = cfg.n_samples;
  b.n_directions = cfg.n_directions;
  return b;
}

bool want_suite(const RunConfig& cfg, const std::string& name) {
  return cfg.suite.empty() || cfg.suite == name;
}

// --------------------------------------------------------- diagnostics -----

void grassmann_diagnostics(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  RngStream root(cfg.seed);
  const int n = cfg.n, k = cfg.k;

  if (want_suite(cfg, "metric-axioms")) {
    RngStream rng = root.child(1);
    int bad = 0;
    for (int i = 0; i < 200; ++i) {
      const Subspace a = grassmann::haar_sample(n, k, rng);
      const Subspace b = grassmann::haar_sample(n, k, rng);
      const Subspace c = grassmann::haar_sample(n, k, rng);
      for (const auto metric :
           {grassmann::Metric::kSigmaInf, grassmann::Metric::kMinRotation}) {
        const double ab = grassmann::metric_value(metric, a, b);
        const double ba = grassmann::metric_value(metric, b, a);
        const double ac = grassmann::metric_value(metric, a, c);
        const double bc = grassmann::metric_value(metric, b, c);
        if (std::abs(ab - ba) > 1e-8) ++bad;
        if (grassmann::metric_value(metric, a, a) > 1e-8) ++bad;
        if (ac > ab + bc + 1e-8) ++bad;
      }
    }
    suites.push_back({"metric-axioms",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "violations=" + std::to_string(bad)});
  }

  if (want_suite(cfg, "lipschitz-equivalence")) {
    RngStream rng = root.child(2);
    int bad = 0;
    for (int i = 0; i < 500; ++i) {
      const Subspace a = grassmann::haar_sample(n, k, rng);
      const Subspace b = grassmann::haar_sample(n, k, rng);
      const double s = grassmann::sigma_inf(a, b);
      const double d = grassmann::metric_d(a, b);
      if (!(s <= d + 1e-9 && d <= std::sqrt(2.0) * s + 1e-9)) ++bad;
    }
    suites.push_back({"lipschitz-equivalence",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "violations=" + std::to_string(bad)});
  }

  if (want_suite(cfg, "rotation-mapping")) {
    RngStream rng = root.child(3);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const Subspace a = grassmann::haar_sample(n, k, rng);
      const Subspace b = grassmann::haar_sample(n, k, rng);
      const grassmann::Rotation u = grassmann::rotation_mapping(a, b);
      const Matrix mapped = u.matrix * a.frame();
      const Subspace image = Subspace::from_span(mapped);
      if (grassmann::sigma_inf(image, b) > 1e-8) ++bad;
      Eigen::JacobiSVD<Matrix> svd(Matrix::Identity(n, n) - u.matrix);
      if (std::abs(svd.singularValues()(0) - grassmann::metric_d(a, b)) >
          1e-8)
        ++bad;
    }
    suites.push_back({"rotation-mapping",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "violations=" + std::to_string(bad)});
  }

  if (want_suite(cfg, "haar-invariance")) {
    RngStream rng = root.child(4);
    const Subspace e0 = grassmann::haar_sample(n, k, rng);
    const grassmann::Rotation u = grassmann::haar_rotation(n, rng);
    std::vector<double> plain, rotated;
    for (int i = 0; i < 1500; ++i) {
      const Subspace s1 = grassmann::haar_sample(n, k, rng);
      const Subspace s2 = grassmann::haar_sample(n, k, rng);
      plain.push_back(grassmann::sigma_inf(s1, e0));
      rotated.push_back(grassmann::sigma_inf(
          Subspace::from_span(u.matrix * s2.frame()), e0));
    }
    const double p = stats::ks_test_two_sample(plain, rotated);
    ctx.log_value("haar-invariance-pvalue", p, "two-sample-ks", cfg.seed);
    suites.push_back({"haar-invariance",
                      p >= 0.01 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "p=" + fmt(p)});
  }

  if (want_suite(cfg, "projector-mean")) {
    RngStream rng = root.child(5);
    Matrix mean = Matrix::Zero(n, n);
    const int reps = 4000;
    for (int i = 0; i < reps; ++i)
      mean += grassmann::haar_sample(n, k, rng).projector();
    mean /= static_cast<double>(reps);
    const double dev =
        (mean - (static_cast<double>(k) / n) * Matrix::Identity(n, n))
            .cwiseAbs()
            .maxCoeff();
    // Entry stderr is about 0.5/sqrt(reps) at worst.
    const bool ok = dev < 5.0 * 0.5 / std::sqrt(static_cast<double>(reps));
    suites.push_back({"projector-mean",
                      ok ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "max_dev=" + fmt(dev)});
  }

  if (want_suite(cfg, "ball-sampler")) {
    RngStream rng = root.child(6);
    const Subspace e0 = grassmann::haar_sample(n, k, rng);
    const double delta =
        0.5 * grassmann::metric_diameter(cfg.metric);
    int outside = 0;
    for (int i = 0; i < 400; ++i) {
      const Subspace f = grassmann::ball_sample(e0, delta, cfg.metric, rng);
      if (grassmann::metric_value(cfg.metric, e0, f) > delta * (1 + 1e-9))
        ++outside;
    }
    RngStream m1 = root.child(7);
    RngStream m2 = root.child(8);
    const auto est1 =
        grassmann::ball_measure_estimate(e0, delta, cfg.metric, 20000, m1);
    const auto est2 =
        grassmann::ball_measure_estimate(e0, delta, cfg.metric, 20000, m2);
    const double pooled = std::hypot(est1.se, est2.se);
    const bool consistent =
        std::abs(est1.value - est2.value) <= 3.0 * pooled + 1e-12;
    ctx.log("ball-measure-a", est1, 0.0);
    ctx.log("ball-measure-b", est2, 0.0);
    suites.push_back(
        {"ball-sampler",
         (outside == 0 && consistent) ? SuiteStatus::kPass : SuiteStatus::kFail,
         "outside=" + std::to_string(outside) + " measures=" +
             fmt(est1.value) + "/" + fmt(est2.value)});
  }

  if (want_suite(cfg, "ball-measure-curve")) {
    io::CsvWriter csv(cfg.out_dir + "/ball_measure.csv");
    ctx.files.push_back(cfg.out_dir + "/ball_measure.csv");
    csv.header({"delta", "measure", "stderr", "N"});
    std::vector<double> lx, ly;
    RngStream rng = root.child(9);
    const Subspace e0 = grassmann::haar_sample(n, k, rng);
    for (double delta = 0.3; delta <= 0.901; delta += 0.1) {
      RngStream sub = rng.child(static_cast<std::uint64_t>(delta * 1000));
      const auto est = grassmann::ball_measure_estimate(
          e0, delta, cfg.metric, cfg.n_samples, sub);
      ctx.log("ball-measure(delta=" + fmt_short(delta) + ")", est, 0.0);
      csv.row({fmt(delta), fmt(est.value), fmt(est.se),
               std::to_string(est.n)});
      if (est.value > 0.0) {
        lx.push_back(std::log(delta));
        ly.push_back(std::log(est.value));
      }
    }
    double slope = 0.0;
    if (lx.size() >= 2) slope = stats::regression_slope(lx, ly);
    ctx.log_value("ball-measure-slope", slope, "log-log-regression", cfg.seed);
    suites.push_back({"ball-measure-curve", SuiteStatus::kPass,
                      "slope=" + fmt(slope) + " dim=" +
                          std::to_string(k * (n - k))});
  }

  if (want_suite(cfg, "packing")) {
    io::CsvWriter csv(cfg.out_dir + "/packing.csv");
    ctx.files.push_back(cfg.out_dir + "/packing.csv");
    csv.header({"eps", "count"});
    std::vector<double> lx, ly;
    for (double eps : {0.2, 0.3, 0.4, 0.6}) {
      RngStream sub = root.child(20 + static_cast<std::uint64_t>(eps * 100));
      const int count = grassmann::packing_number_estimate(
          n, k, eps, cfg.metric, 4000, sub);
      csv.row({fmt(eps), std::to_string(count)});
      lx.push_back(std::log(1.0 / eps));
      ly.push_back(std::log(static_cast<double>(count)));
    }
    const double slope = stats::regression_slope(lx, ly);
    ctx.log_value("packing-slope", slope, "log-log-regression", cfg.seed);
    suites.push_back({"packing", SuiteStatus::kPass,
                      "slope=" + fmt(slope) + " expected~" +
                          std::to_string(k * (n - k))});
  }
}

// ---------------------------------------------------- measure diagnostics --

/// Rejection sampler driven by the density itself, valid for bounded
/// supports: uniform proposals on the bounding box against the located sup.
std::vector<double> rejection_projected(const Measure& mu, const Vector& dir,
                                        int count, RngStream& rng) {
  const double rho = *mu.support_radius();
  double log_sup = -std::numeric_limits<double>::infinity();
  if (const auto u = mu.uniform_log_density()) {
    log_sup = *u;
  } else {
    for (int i = 0; i < 4000; ++i) {
      RngStream sub = rng.child(900000 + i);
      log_sup = std::max(log_sup, mu.log_density(mu.sample(sub)));
    }
    log_sup += 0.05;  // headroom over the located maximum
  }
  std::vector<double> out;
  const int d = mu.dim();
  std::uint64_t tries = 0;
  while (out.size() < static_cast<std::size_t>(count)) {
    if (++tries > 2000000ULL)
      throw std::runtime_error("rejection sampler stalled");
    Vector x(d);
    for (int i = 0; i < d; ++i) x(i) = rng.uniform(-rho, rho);
    const double lf = mu.log_density(x);
    if (lf == -std::numeric_limits<double>::infinity()) continue;
    if (std::log(std::max(rng.uniform(), 1e-300)) < lf - log_sup)
      out.push_back(x.dot(dir));
  }
  return out;
}

void measure_diagnostics(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  RngStream root(cfg.seed);

  if (want_suite(cfg, "descriptor-roundtrip")) {
    const std::string text = mu.descriptor().to_string();
    const std::string again =
        measures::from_descriptor(text).descriptor().to_string();
    suites.push_back({"descriptor-roundtrip",
                      text == again ? SuiteStatus::kPass : SuiteStatus::kFail,
                      text});
  }

  if (want_suite(cfg, "reproducibility")) {
    const auto b1 = measures::sample_batch(mu, 64, cfg.seed);
    const auto b2 = measures::sample_batch(mu, 64, cfg.seed);
    const auto b3 = measures::sample_batch(mu, 64, cfg.seed + 1);
    const bool same = (b1.points - b2.points).cwiseAbs().maxCoeff() == 0.0;
    const bool different =
        (b1.points - b3.points).cwiseAbs().maxCoeff() > 0.0;
    suites.push_back({"reproducibility",
                      same && different ? SuiteStatus::kPass
                                        : SuiteStatus::kFail,
                      same ? "identical for equal seeds" : "mismatch"});
  }

  if (want_suite(cfg, "covariance-identity")) {
    RngStream rng = root.child(2);
    const auto est = measures::covariance_estimate(mu, 100000, rng);
    double worst = 0.0;
    bool ok = true;
    const auto claimed = mu.covariance();
    for (int i = 0; i < mu.dim(); ++i)
      for (int j = 0; j < mu.dim(); ++j) {
        const double target =
            claimed ? (*claimed)(i, j) : (i == j ? 1.0 : 0.0);
        const double dev = std::abs(est.cov(i, j) - target);
        worst = std::max(worst, dev / std::max(est.se(i, j), 1e-12));
        if (dev > 5.0 * est.se(i, j) + 1e-9) ok = false;
      }
    suites.push_back({"covariance-identity",
                      ok ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "worst_z=" + fmt(worst)});
  }

  if (want_suite(cfg, "log-concavity") && mu.has_density()) {
    RngStream rng = root.child(3);
    int bad = 0;
    for (int i = 0; i < 300; ++i) {
      RngStream s1 = rng.child(2 * i);
      RngStream s2 = rng.child(2 * i + 1);
      const Vector a = mu.sample(s1);
      const Vector b = mu.sample(s2);
      const double fa = mu.density(a);
      const double fb = mu.density(b);
      const double fm = mu.density(0.5 * (a + b));
      if (fm * fm < fa * fb - 1e-12) ++bad;
    }
    suites.push_back({"log-concavity",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "violations=" + std::to_string(bad)});
  }

  if (want_suite(cfg, "sampler-density-gof") && mu.has_density()) {
    SuiteStatus status = SuiteStatus::kPass;
    std::string detail;
    RngStream rng = root.child(4);
    const auto name = mu.descriptor().name;
    if (name == "gaussian") {
      for (int rep = 0; rep < 3; ++rep) {
        Vector dir(mu.dim());
        for (int i = 0; i < mu.dim(); ++i) dir(i) = rng.normal();
        dir.normalize();
        std::vector<double> proj;
        for (int i = 0; i < 4000; ++i) {
          RngStream sub = rng.child(1000 + rep * 10000 + i);
          proj.push_back(mu.sample(sub).dot(dir));
        }
        const double d = stats::ks_statistic(
            proj, [](double t) { return stats::normal_cdf(t); });
        const double p = stats::ks_pvalue(d, static_cast<double>(proj.size()));
        detail += fmt(p) + " ";
        if (p < 0.01) status = SuiteStatus::kFail;
      }
    } else if (mu.support_radius() && mu.dim() <= 3) {
      for (int rep = 0; rep < 3; ++rep) {
        Vector dir(mu.dim());
        for (int i = 0; i < mu.dim(); ++i) dir(i) = rng.normal();
        dir.normalize();
        std::vector<double> via_sampler;
        for (int i = 0; i < 2500; ++i) {
          RngStream sub = rng.child(5000 + rep * 10000 + i);
          via_sampler.push_back(mu.sample(sub).dot(dir));
        }
        RngStream rej = rng.child(777 + rep);
        const std::vector<double> via_density =
            rejection_projected(mu, dir, 2500, rej);
        const double p = stats::ks_test_two_sample(via_sampler, via_density);
        detail += fmt(p) + " ";
        if (p < 0.01) status = SuiteStatus::kFail;
      }
    } else {
      status = SuiteStatus::kIndeterminate;
      detail = "no independent density oracle at this dimension";
    }
    suites.push_back({"sampler-density-gof", status, "p: " + detail});
  }
}

// ----------------------------------------------------------- estimate ------

void run_estimate(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  RngStream root(cfg.seed);
  const EstimatorBudget budget = budget_from(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  EstimateWithCI est;
  SuiteStatus status = SuiteStatus::kPass;
  if (cfg.estimator == "isotropic-constant-density") {
    est = estimators::isotropic_constant_density(mu, budget, root);
  } else if (cfg.estimator == "isotropic-constant-volumetric") {
    est = estimators::isotropic_constant_volumetric(mu, budget, root);
  } else if (cfg.estimator == "marginal-L") {
    RngStream frng = root.child(1);
    const Subspace f = grassmann::haar_sample(mu.dim(), cfg.k, frng);
    RngStream erng = root.child(2);
    est = estimators::marginal_L(mu, f, cfg.l_method, budget, erng);
  } else if (cfg.estimator == "a-k-average") {
    est = estimators::a_k_average(mu, cfg.k, cfg.n_subspaces, cfg.n_samples,
                                  root);
  } else if (cfg.estimator == "affine-quermass") {
    // The centroid body of the measure at q = k drives the paper-side uses.
    const auto body =
        geometry::zq_body(mu, cfg.k, cfg.n_samples, root.child(1));
    RngStream erng = root.child(2);
    est = estimators::affine_quermassintegral(body, cfg.k, cfg.n_subspaces,
                                              erng);
  } else if (cfg.estimator == "dual-affine-quermass") {
    const auto h = mu.support_halfspaces();
    if (!h) throw std::invalid_argument("measure has no support polytope");
    const auto body = geometry::ConvexBody::from_halfspaces(*h, true);
    RngStream erng = root.child(2);
    est = estimators::dual_affine_quermassintegral(body, cfg.k,
                                                   cfg.n_subspaces, erng);
  } else if (cfg.estimator == "iq-moment") {
    est = estimators::iq_moment(mu, cfg.q, cfg.n_samples, root);
  } else if (cfg.estimator == "q-minus-c") {
    const auto p = estimators::q_minus_c_estimate(mu, cfg.delta,
                                                  cfg.n_samples, root);
    if (p) {
      est.value = *p;
      est.method = "q-minus-c";
      est.seed = cfg.seed;
    } else {
      status = SuiteStatus::kIndeterminate;
      est.method = "q-minus-c/indeterminate";
    }
  } else if (cfg.estimator == "zq-support") {
    const auto body = geometry::zq_body(mu, cfg.q, cfg.n_samples, root);
    const Matrix dirs =
        geometry::direction_set(mu.dim(), 64, RngStream(cfg.seed));
    geometry::write_support_table(body, dirs,
                                  cfg.out_dir + "/support_table.csv");
    ctx.files.push_back(cfg.out_dir + "/support_table.csv");
    est = body.support_ci(dirs.col(0));
  } else {
    throw std::invalid_argument("unknown estimator: " + cfg.estimator);
  }
  const double wall_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - t0)
          .count();
  ctx.log("estimate/" + cfg.estimator, est, wall_ms);
  suites.push_back({"estimate", status,
                    cfg.estimator + " = " + fmt(est.value) + " +- " +
                        fmt(est.se)});
}

// ------------------------------------------------- inequality batteries ----

void verify_inequalities(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  const int n = mu.dim();
  RngStream root(cfg.seed);
  const EstimatorBudget budget = budget_from(cfg);

  if (want_suite(cfg, "z2-identity")) {
    const auto z2 = geometry::zq_body(mu, 2.0, cfg.n_samples, root.child(1));
    const Matrix dirs = geometry::direction_set(n, 50, root.child(2));
    Matrix target = Matrix::Identity(n, n);
    if (const auto cov = mu.covariance()) target = *cov;
    int bad = 0;
    double worst = 0.0;
    for (int j = 0; j < dirs.cols(); ++j) {
      const auto h = z2.support_ci(dirs.col(j));
      const double expected =
          std::sqrt(dirs.col(j).dot(target * dirs.col(j)));
      const double z = std::abs(h.value - expected) / std::max(h.se, 1e-12);
      worst = std::max(worst, z);
      if (z > 3.0) ++bad;
    }
    suites.push_back({"z2-identity",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "worst_z=" + fmt(worst)});
  }

  if (want_suite(cfg, "zq-monotonicity")) {
    const Matrix dirs = geometry::direction_set(n, 12, root.child(3));
    int bad = 0;
    std::vector<double> qs = {1.0, 2.0, 4.0, 8.0};
    std::vector<geometry::ConvexBody> bodies;
    for (double q : qs)
      bodies.push_back(
          geometry::zq_body(mu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(40 + q))));
    for (int j = 0; j < dirs.cols(); ++j) {
      for (std::size_t a = 0; a + 1 < qs.size(); ++a) {
        const auto lo = bodies[a].support_ci(dirs.col(j));
        const auto hi = bodies[a + 1].support_ci(dirs.col(j));
        if (lo.value > hi.value * (1.0 + 3.0 * (lo.se + hi.se))) ++bad;
      }
    }
    suites.push_back({"zq-monotonicity",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "violations=" + std::to_string(bad)});
  }

  if (want_suite(cfg, "projection-identity")) {
    int failures = 0, checks = 0;
    for (double q : {1.0, 2.0, 4.0}) {
      RngStream frng = root.child(60 + static_cast<std::uint64_t>(q));
      const Subspace f = grassmann::haar_sample(n, cfg.k, frng);
      const auto z_full =
          geometry::zq_body(mu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(70 + q)));
      const auto z_marg = geometry::zq_body(
          measures::marginal(mu, f), q, cfg.n_samples, root.child(static_cast<std::uint64_t>(80 + q)));
      const Matrix dirs =
          geometry::direction_set(cfg.k, 20, root.child(static_cast<std::uint64_t>(90 + q)));
      for (int j = 0; j < dirs.cols(); ++j) {
        const Vector y = dirs.col(j);
        const auto a = z_full.support_ci(f.frame() * y);
        const auto b = z_marg.support_ci(y);
        const double pooled = std::hypot(a.se, b.se) + 1e-12;
        ++checks;
        if (std::abs(a.value - b.value) > 3.3 * pooled) ++failures;
      }
    }
    suites.push_back({"projection-identity",
                      failures <= checks / 30 ? SuiteStatus::kPass
                                              : SuiteStatus::kFail,
                      std::to_string(failures) + "/" +
                          std::to_string(checks) + " direction checks out"});
  }

  if (want_suite(cfg, "fradelizi") && mu.has_density()) {
    SuiteStatus status = SuiteStatus::kPass;
    std::string detail;
    try {
      const auto est = estimators::isotropic_constant_density(mu, budget,
                                                              root);
      ctx.log("fradelizi/L-density", est, 0.0);
      detail = "L=" + fmt(est.value);
    } catch (const std::exception& ex) {
      status = SuiteStatus::kFail;
      detail = ex.what();
    }
    suites.push_back({"fradelizi", status, detail});
  }

  if (want_suite(cfg, "product-sandwich") && n <= 6) {
    const Measure nu = measures::gaussian(std::max(1, std::min(3, n)));
    const Measure prod = measures::product(mu, nu);
    int bad = 0, checks = 0;
    for (double q : {1.0, 2.0, 4.0}) {
      const auto z_mu =
          geometry::zq_body(mu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(100 + q)));
      const auto z_nu =
          geometry::zq_body(nu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(110 + q)));
      const auto z_prod =
          geometry::zq_body(prod, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(120 + q)));
      const Matrix dx = geometry::direction_set(mu.dim(), 8, root.child(130));
      const Matrix dy = geometry::direction_set(nu.dim(), 8, root.child(131));
      for (int j = 0; j < 8; ++j) {
        Vector xy(prod.dim());
        xy.head(mu.dim()) = dx.col(j);
        xy.tail(nu.dim()) = dy.col(j);
        const auto hx = z_mu.support_ci(dx.col(j));
        const auto hy = z_nu.support_ci(dy.col(j));
        const auto hp = z_prod.support_ci(xy);
        const double slack =
            3.0 * (hx.se + hy.se + hp.se) + 1e-9;
        ++checks;
        const double lo = std::max(hx.value, hy.value);
        const double hi = hx.value + hy.value;
        if (!(lo <= hp.value + slack && hp.value <= hi + slack &&
              hi <= 2.0 * hp.value + 2.0 * slack))
          ++bad;
      }
    }
    suites.push_back({"product-sandwich",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      std::to_string(bad) + "/" + std::to_string(checks) +
                          " violations"});
  }

  if (want_suite(cfg, "convolution-sandwich")) {
    const Measure conv = measures::convolve(mu, mu);
    int bad = 0, checks = 0;
    for (double q : {1.0, 2.0, 4.0}) {
      const auto z_mu =
          geometry::zq_body(mu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(140 + q)));
      const auto z_conv =
          geometry::zq_body(conv, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(150 + q)));
      const Matrix dirs = geometry::direction_set(n, 8, root.child(160));
      for (int j = 0; j < dirs.cols(); ++j) {
        const auto h1 = z_mu.support_ci(dirs.col(j));
        const auto hc = z_conv.support_ci(dirs.col(j));
        const double slack = 3.0 * (2.0 * h1.se + hc.se) + 1e-9;
        ++checks;
        // Z_q(mu * mu) inside Z_q + Z_q inside 2 Z_q(mu * mu).
        if (!(hc.value <= 2.0 * h1.value + slack &&
              2.0 * h1.value <= 2.0 * hc.value + 2.0 * slack))
          ++bad;
      }
    }
    suites.push_back({"convolution-sandwich",
                      bad == 0 ? SuiteStatus::kPass : SuiteStatus::kFail,
                      std::to_string(bad) + "/" + std::to_string(checks) +
                          " violations"});
  }

  if (want_suite(cfg, "zq-volume-bounds") && n <= 6 && mu.has_density()) {
    // Two-sided bounds with empirically logged constants: the upper side is
    // c sqrt(q/n), the lower side the same shape divided by L.
    const auto l_est = estimators::isotropic_constant_density(mu, budget,
                                                              root.child(170));
    double c_up = 0.0;
    double c_dn = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= n; ++q) {
      const auto zq =
          geometry::zq_body(mu, q, cfg.n_samples, root.child(static_cast<std::uint64_t>(180 + q)));
      const auto vb =
          geometry::volume_sandwich(zq, cfg.n_directions, root.child(static_cast<std::uint64_t>(190 + q)));
      const double shape = std::sqrt(static_cast<double>(q) / n);
      if (vb.upper > 0)
        c_up = std::max(c_up, std::pow(vb.upper, 1.0 / n) / shape);
      if (vb.lower > 0)
        c_dn = std::min(c_dn, std::pow(vb.lower, 1.0 / n) * l_est.value /
                                  shape);
    }
    ctx.log_value("zq-volume/c-upper", c_up, "logged-constant", cfg.seed);
    ctx.log_value("zq-volume/c-lower", c_dn, "logged-constant", cfg.seed);
    const bool sane = c_up > 0.05 && c_up < 20.0 && c_dn > 0.01;
    suites.push_back({"zq-volume-bounds",
                      sane ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "c_up=" + fmt(c_up) + " c_dn=" + fmt(c_dn)});
  }

  if (want_suite(cfg, "a-k-equivalence") && n <= 6 && mu.has_density() &&
      cfg.k <= 2) {
    const int k = cfg.k;
    const auto a_k = estimators::a_k_average(mu, k, 200, cfg.n_samples,
                                             root.child(200));
    ctx.log("a-k/average", a_k, 0.0);
    // Haar moment of the marginal constants.
    std::vector<double> logs;
    for (int j = 0; j < 200; ++j) {
      RngStream sub = root.child(210).child(j);
      RngStream frng = sub.child(0);
      RngStream erng = sub.child(1);
      const Subspace f = grassmann::haar_sample(n, k, frng);
      const auto l = estimators::marginal_L(mu, f, estimators::LMethod::kDensity,
                                            budget, erng);
      if (l.value > 0) logs.push_back(k * n * std::log(l.value));
    }
    if (logs.empty()) {
      suites.push_back({"a-k-equivalence", SuiteStatus::kIndeterminate,
                        "no usable marginal constants"});
      return;
    }
    double peak = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - peak);
    const double l_moment =
        std::exp((peak + std::log(acc / logs.size())) / (k * n));
    // Affine quermassintegral of Z_k.
    const auto zk = geometry::zq_body(mu, k, cfg.n_samples, root.child(220));
    const auto phi =
        estimators::affine_quermassintegral(zk, k, 200, root.child(221));
    ctx.log("a-k/phi", phi, 0.0);
    const double r1 = a_k.value / l_moment;
    const double r2 = a_k.value * phi.value;
    ctx.log_value("a-k/ratio-vs-Lmoment", r1, "logged-constant", cfg.seed);
    ctx.log_value("a-k/ratio-vs-invPhi", r2, "logged-constant", cfg.seed);
    const bool sane = r1 > 0.125 && r1 < 8.0 && r2 > 0.125 && r2 < 8.0;
    suites.push_back({"a-k-equivalence",
                      sane ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "A/Lmom=" + fmt(r1) + " A*Phi=" + fmt(r2)});
  }

  if (want_suite(cfg, "qv-floor") && n <= 6 && mu.has_density()) {
    const auto l_est =
        estimators::isotropic_constant_density(mu, budget, root.child(230));
    const auto zn =
        geometry::zq_body(mu, n, cfg.n_samples, root.child(231));
    const auto vb =
        geometry::volume_sandwich(zn, cfg.n_directions, root.child(232));
    // Smallest c with q_v(mu, c L) = n, certified from the bracket low end.
    double c_star = std::numeric_limits<double>::infinity();
    if (vb.lower > 0)
      c_star = 1.0 / (std::pow(vb.lower, 1.0 / n) * l_est.value);
    ctx.log_value("qv-floor/c", c_star, "logged-constant", cfg.seed);
    suites.push_back({"qv-floor",
                      std::isfinite(c_star) && c_star < 20.0
                          ? SuiteStatus::kPass
                          : SuiteStatus::kFail,
                      "c=" + fmt(c_star)});
  }

  if (want_suite(cfg, "qv-vs-qmc") && n <= 6) {
    RngStream qrng = root.child(240);
    const auto qv = estimators::qv_estimate(mu, cfg.beta, budget, qrng);
    RngStream crng = root.child(241);
    const auto qmc =
        estimators::q_minus_c_estimate(mu, 2.0 * cfg.beta, cfg.n_samples,
                                       crng);
    if (!qmc) {
      suites.push_back({"qv-vs-qmc", SuiteStatus::kIndeterminate,
                        "q_{-c} undecidable at this budget"});
    } else {
      const double ratio = *qmc > 0 ? qv.q_v / *qmc : 0.0;
      ctx.log_value("qv-vs-qmc/ratio", ratio, "logged-constant", cfg.seed);
      suites.push_back({"qv-vs-qmc", SuiteStatus::kPass,
                        "q_v=" + std::to_string(qv.q_v) +
                            " q_{-c}=" + fmt(*qmc)});
    }
  }

  if (want_suite(cfg, "smoothing-sandwich") && n <= 3 && mu.has_density()) {
    const Measure smoothed = measures::gaussian_smoothing(mu, cfg.xi);
    const auto zk =
        geometry::zq_body(smoothed, std::max(1, n), cfg.n_samples,
                          root.child(250));
    const Matrix dirs = geometry::direction_set(n, 64, root.child(251));
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int j = 0; j < dirs.cols(); ++j) {
      const double h = zk.support(dirs.col(j));
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    ctx.log_value("smoothing/inradius", lo, "probe", cfg.seed);
    ctx.log_value("smoothing/circumradius", hi, "probe", cfg.seed);
    const double implied = hi / lo * cfg.xi;  // ratio constant at this xi
    const bool sane = lo > 0 && hi / lo <= 20.0 / cfg.xi;
    suites.push_back({"smoothing-sandwich",
                      sane ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "R/r=" + fmt(hi / lo) + " implied_C=" + fmt(implied)});
  }

  if (want_suite(cfg, "special-pair") && cfg.k < n) {
    const auto [mu1, mu2] = measures::special_measure_pair(
        cfg.k, n, cfg.xi, "cube");
    RngStream rng = root.child(260);
    // Coordinate marginal of mu2 must reproduce mu1 (two-sample projections).
    std::vector<double> from_pair, from_mu1;
    Vector dir(cfg.k);
    for (int i = 0; i < cfg.k; ++i) dir(i) = rng.normal();
    dir.normalize();
    for (int i = 0; i < 3000; ++i) {
      RngStream s1 = rng.child(2 * i);
      RngStream s2 = rng.child(2 * i + 1);
      from_pair.push_back(mu2.sample(s1).head(cfg.k).dot(dir));
      from_mu1.push_back(mu1.sample(s2).dot(dir));
    }
    const double p = stats::ks_test_two_sample(from_pair, from_mu1);
    // Isotropy of the product.
    RngStream crng = root.child(261);
    const auto cov = measures::covariance_estimate(mu2, 60000, crng);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double target = i == j ? 1.0 : 0.0;
        worst = std::max(worst, std::abs(cov.cov(i, j) - target) /
                                    std::max(cov.se(i, j), 1e-12));
      }
    // Ball sandwich for Z_k(mu2): support-probed inradius and circumradius,
    // the ratio logged against the 1/xi shape.
    const auto zk =
        geometry::zq_body(mu2, cfg.k, cfg.n_samples, root.child(262));
    const Matrix zdirs = geometry::direction_set(n, 64, root.child(263));
    double rlo = std::numeric_limits<double>::infinity(), rhi = 0.0;
    for (int j = 0; j < zdirs.cols(); ++j) {
      const double h = zk.support(zdirs.col(j));
      rlo = std::min(rlo, h);
      rhi = std::max(rhi, h);
    }
    ctx.log_value("special-pair/zk-inradius", rlo, "probe", cfg.seed);
    ctx.log_value("special-pair/zk-circumradius", rhi, "probe", cfg.seed);
    const bool ball_ok = rlo > 0 && rhi / rlo <= 20.0 / cfg.xi;
    const bool ok = p >= 0.01 && worst < 5.0 && ball_ok;
    suites.push_back({"special-pair",
                      ok ? SuiteStatus::kPass : SuiteStatus::kFail,
                      "marginal_p=" + fmt(p) + " worst_cov_z=" + fmt(worst) +
                          " zk_ratio=" + fmt(rhi / rlo)});
  }
}

// --------------------------------------------------------- search suite ----

void run_search(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  search::SearchConfig scfg;
  scfg.epsilon = cfg.epsilon;
  scfg.metric = cfg.metric;
  scfg.beta = cfg.beta;
  scfg.accept_constant = cfg.accept_constant;
  scfg.max_trials = cfg.max_trials;
  scfg.l_method = cfg.l_method;
  scfg.seed = cfg.seed;
  scfg.workers = cfg.workers;
  scfg.budget = budget_from(cfg);

  const Subspace center = Subspace::coordinate(mu.dim(), cfg.k);
  const auto result = search::neighborhood_search(mu, center, scfg);

  io::JsonlWriter trials(cfg.out_dir + "/trials.jsonl");
  ctx.files.push_back(cfg.out_dir + "/trials.jsonl");
  for (const auto& t : result.trials) {
    nlohmann::json rec;
    rec["trial"] = t.index;
    rec["subspace_digest"] = t.subspace_digest;
    rec["distance"] = t.distance;
    rec["L"] = t.l_value;
    rec["stderr"] = t.l_se;
    rec["accepted"] = t.accepted;
    rec["threshold"] = result.threshold;
    rec["seed"] = cfg.seed;
    rec["method"] = estimators::l_method_name(cfg.l_method);
    trials.write(rec);
  }
  io::CsvWriter csv(cfg.out_dir + "/search_summary.csv");
  ctx.files.push_back(cfg.out_dir + "/search_summary.csv");
  csv.header({"accepted", "trial_count", "distance", "L", "stderr",
              "threshold"});
  csv.row({result.accepted ? "1" : "0", std::to_string(result.trials_run),
           fmt(result.distance), fmt(result.l_estimate.value),
           fmt(result.l_estimate.se), fmt(result.threshold)});

  if (result.accepted) {
    const std::string frame_path = cfg.out_dir + "/accepted_subspace.txt";
    std::ofstream out(frame_path);
    out << grassmann::to_text(*result.accepted);
    ctx.files.push_back(frame_path);
    int accept_index = -1;
    for (const auto& t : result.trials)
      if (t.accepted) {
        accept_index = t.index;
        break;
      }
    const bool self_consistent =
        result.distance < cfg.epsilon &&
        result.l_estimate.value + 2.0 * result.l_estimate.se <
            result.threshold;
    suites.push_back({"neighborhood-search",
                      self_consistent ? SuiteStatus::kPass
                                      : SuiteStatus::kFail,
                      "accepted at trial " + std::to_string(accept_index) +
                          ", L=" + fmt(result.l_estimate.value)});
  } else {
    // The theorem makes this a small-probability event, not a failure.
    suites.push_back({"neighborhood-search", SuiteStatus::kIndeterminate,
                      "no acceptance within max_trials"});
  }
  ctx.log("search/threshold",
          EstimateWithCI{result.threshold, 0, 0, cfg.seed, "threshold"},
          0.0);
}

void run_deviation(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  const auto prof = search::deviation_profile(
      mu, cfg.k, cfg.t_grid, cfg.n_subspaces, cfg.l_method, budget_from(cfg),
      cfg.seed, cfg.workers);
  io::CsvWriter csv(cfg.out_dir + "/deviation_profile.csv");
  ctx.files.push_back(cfg.out_dir + "/deviation_profile.csv");
  csv.header({"t", "tail_fraction", "ci_low", "ci_high", "N_F"});
  bool monotone = true;
  for (std::size_t i = 0; i < prof.rows.size(); ++i) {
    const auto& row = prof.rows[i];
    if (i > 0 && row.tail > prof.rows[i - 1].tail + 1e-12) monotone = false;
    csv.row({fmt(row.t), fmt(row.tail), fmt(row.ci_lo), fmt(row.ci_hi),
             std::to_string(prof.n_subspaces)});
  }
  ctx.log_value("deviation/median", prof.median, "median", cfg.seed);
  ctx.log_value("deviation/slope", prof.log_log_slope(), "log-log", cfg.seed);
  suites.push_back({"deviation-profile",
                    monotone ? SuiteStatus::kPass : SuiteStatus::kFail,
                    "median=" + fmt(prof.median) +
                        " slope=" + fmt(prof.log_log_slope())});
}

void run_stability(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  const auto rep = search::stability_check(mu, cfg.k, cfg.pair_count,
                                           budget_from(cfg), cfg.seed);
  io::CsvWriter csv(cfg.out_dir + "/stability_pairs.csv");
  ctx.files.push_back(cfg.out_dir + "/stability_pairs.csv");
  csv.header({"distance", "body_ratio", "body_bound", "l_ratio", "l_bound"});
  for (const auto& p : rep.pairs)
    csv.row({fmt(p.distance), fmt(p.body_ratio), fmt(p.body_bound),
             fmt(p.l_ratio), fmt(p.l_bound)});
  const bool ok = rep.body_violations == 0 &&
                  rep.l_violations <= cfg.pair_count / 20;
  suites.push_back(
      {"stability-check", ok ? SuiteStatus::kPass : SuiteStatus::kFail,
       "body_violations=" + std::to_string(rep.body_violations) +
           " l_violations=" + std::to_string(rep.l_violations)});
}

void run_sharpness(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure base = measures::from_descriptor(cfg.measure_descriptor);
  const auto rep = search::sharpness_demo(base, cfg.lambda, cfg.n,
                                          cfg.n_subspaces > 100
                                              ? 100
                                              : cfg.n_subspaces,
                                          budget_from(cfg), cfg.seed);
  ctx.log("sharpness/L-base", rep.l_base, 0.0);
  ctx.log("sharpness/L-product", rep.l_product, 0.0);
  ctx.log("sharpness/L-coordinate-marginal", rep.l_coordinate_marginal, 0.0);
  io::CsvWriter csv(cfg.out_dir + "/sharpness_scan.csv");
  ctx.files.push_back(cfg.out_dir + "/sharpness_scan.csv");
  csv.header({"index", "marginal_L"});
  for (std::size_t i = 0; i < rep.scanned_l.size(); ++i)
    csv.row({std::to_string(i), fmt(rep.scanned_l[i])});
  const double pooled =
      std::hypot(rep.l_base.se, rep.l_coordinate_marginal.se) + 1e-12;
  const bool marginal_matches =
      std::abs(rep.l_coordinate_marginal.value - rep.l_base.value) <=
      std::max(3.0 * pooled, 0.02 * rep.l_base.value);
  suites.push_back(
      {"sharpness-demo",
       rep.lifted_below_base && marginal_matches ? SuiteStatus::kPass
                                                 : SuiteStatus::kFail,
       "lifted=" + fmt(rep.lifted_value) + " base=" + fmt(rep.l_base.value) +
           " implied_C=" + fmt(rep.implied_constant)});
}

void run_qv(RunContext& ctx, std::vector<SuiteResult>& suites) {
  const RunConfig& cfg = ctx.cfg;
  const Measure mu = measures::from_descriptor(cfg.measure_descriptor);
  RngStream root(cfg.seed);
  const auto result =
      estimators::qv_estimate(mu, cfg.beta, budget_from(cfg), root);
  io::CsvWriter csv(cfg.out_dir + "/qv_profile.csv");
  ctx.files.push_back(cfg.out_dir + "/qv_profile.csv");
  csv.header({"q", "vr_lower", "vr_upper", "threshold", "status"});
  for (const auto& row : result.profile)
    csv.row({std::to_string(row.q), fmt(row.vr_lower), fmt(row.vr_upper),
             fmt(row.threshold), std::to_string(row.status)});
  ctx.log_value("qv", result.q_v, "qv-scan", cfg.seed);
  suites.push_back({"qv-profile",
                    result.any_indeterminate ? SuiteStatus::kIndeterminate
                                             : SuiteStatus::kPass,
                    "q_v=" + std::to_string(result.q_v)});
}

}  // namespace

std::string suite_status_name(SuiteStatus s) {
  switch (s) {
    case SuiteStatus::kPass:
      return "pass";
    case SuiteStatus::kFail:
      return "fail";
    default:
      return "indeterminate";
  }
}

int RunOutcome::exit_code() const {
  bool any_fail = false, any_indet = false;
  for (const auto& s : suites) {
    any_fail |= s.status == SuiteStatus::kFail;
    any_indet |= s.status == SuiteStatus::kIndeterminate;
  }
  if (any_fail) return 1;
  if (any_indet) return 2;
  return 0;
}

RunOutcome run(const config::RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!io::ensure_directory(cfg.out_dir))
    throw std::runtime_error("cannot create output directory: " + cfg.out_dir);
  RunContext ctx(cfg, cfg.out_dir);
  RunOutcome outcome;

  if (cfg.command == "grassmann-diagnostics") {
    grassmann_diagnostics(ctx, outcome.suites);
  } else if (cfg.command == "measure-diagnostics") {
    measure_diagnostics(ctx, outcome.suites);
  } else if (cfg.command == "estimate") {
    run_estimate(ctx, outcome.suites);
  } else if (cfg.command == "verify-inequalities") {
    verify_inequalities(ctx, outcome.suites);
  } else if (cfg.command == "neighborhood-search") {
    run_search(ctx, outcome.suites);
  } else if (cfg.command == "deviation-profile") {
    run_deviation(ctx, outcome.suites);
  } else if (cfg.command == "stability-check") {
    run_stability(ctx, outcome.suites);
  } else if (cfg.command == "sharpness-demo") {
    run_sharpness(ctx, outcome.suites);
  } else if (cfg.command == "qv-profile") {
    run_qv(ctx, outcome.suites);
  } else {
    throw std::invalid_argument("unknown command: " + cfg.command);
  }

  outcome.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  outcome.files = ctx.files;

  const std::string manifest_path = cfg.out_dir + "/manifest.txt";
  std::ofstream manifest(manifest_path);
  manifest << "artifact = grasslab 0.1.0\n";
  manifest << "wall_seconds = " << io::format_double(outcome.wall_seconds)
           << "\n\n";
  manifest << "# resolved configuration\n" << ctx.config_text << '\n';
  manifest << "# suites\n";
  for (const auto& s : outcome.suites)
    manifest << "suite " << s.name << " = " << suite_status_name(s.status)
             << "  (" << s.details << ")\n";
  manifest << "\n# files\n";
  for (const auto& f : outcome.files)
    manifest << "file " << f << " fnv64 " << io::digest_file(f) << '\n';
  outcome.manifest_path = manifest_path;
  return outcome;
}

}  // namespace grasslab::runner
