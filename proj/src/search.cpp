#include "grasslab/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "grasslab/stats.hpp"

namespace grasslab::search {

namespace {

constexpr int kChunk = 8;  // fixed trial chunk; independent of worker count

/// Evaluate fn(i) for i in [0, count) in fixed chunks. Within a chunk the
/// items may run on different threads; results land in index order, so the
/// outcome is identical for any worker count. `stop_after` inspects a chunk
/// once it is complete.
template <typename Fn, typename Stop>
void chunked_for(int count, int workers, Fn&& fn, Stop&& stop_after) {
  for (int base = 0; base < count; base += kChunk) {
    const int hi = std::min(count, base + kChunk);
    if (workers <= 1) {
      for (int i = base; i < hi; ++i) fn(i);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next(base);
      const int width = std::min(workers, hi - base);
      for (int w = 0; w < width; ++w) {
        pool.emplace_back([&] {
          for (int i = next.fetch_add(1); i < hi; i = next.fetch_add(1))
            fn(i);
        });
      }
      for (auto& t : pool) t.join();
    }
    if (stop_after(hi)) return;
  }
}

}  // namespace

double SearchConfig::threshold(int n, int k) const {
  const double exponent = 1.0 - static_cast<double>(k) / n;
  return accept_constant * beta / std::pow(epsilon, exponent);
}

SearchResult neighborhood_search(const Measure& mu, const Subspace& center,
                                 const SearchConfig& cfg) {
  if (!(cfg.epsilon > 0.0))
    throw std::invalid_argument("neighborhood_search: epsilon must be > 0");
  if (cfg.max_trials < 1)
    throw std::invalid_argument("neighborhood_search: max_trials must be >= 1");
  const int n = center.n();
  const int k = center.k();
  if (mu.dim() != n)
    throw std::invalid_argument("neighborhood_search: dimension mismatch");

  SearchResult result;
  result.threshold = cfg.threshold(n, k);
  const double diam = grassmann::metric_diameter(cfg.metric);
  const bool unconstrained = cfg.epsilon >= diam;

  RngStream root(cfg.seed);
  std::vector<TrialRecord> records(cfg.max_trials);
  std::vector<Subspace> candidates;
  candidates.reserve(cfg.max_trials);
  for (int i = 0; i < cfg.max_trials; ++i)
    candidates.push_back(center);  // placeholder frames, overwritten per trial

  auto run_trial = [&](int i) {
    RngStream trial_rng = root.child(static_cast<std::uint64_t>(i));
    RngStream sample_rng = trial_rng.child(0);
    const Subspace f =
        unconstrained
            ? grassmann::haar_sample(n, k, sample_rng)
            : grassmann::ball_sample(center, cfg.epsilon, cfg.metric,
                                     sample_rng);
    RngStream est_rng = trial_rng.child(1);
    const EstimateWithCI l =
        estimators::marginal_L(mu, f, cfg.l_method, cfg.budget, est_rng);
    TrialRecord rec;
    rec.index = i;
    rec.subspace_digest = f.digest();
    rec.distance = grassmann::metric_value(cfg.metric, center, f);
    rec.l_value = l.value;
    rec.l_se = l.se;
    rec.accepted = (l.value > 0.0) &&
                   (l.value + 2.0 * l.se < result.threshold) &&
                   (unconstrained || rec.distance < cfg.epsilon);
    records[i] = rec;
    candidates[i] = f;
  };

  int first_accept = -1;
  int evaluated = 0;
  chunked_for(
      cfg.max_trials, cfg.workers, run_trial, [&](int done) {
        evaluated = done;
        if (cfg.best_of_budget) return false;
        for (int i = 0; i < done; ++i) {
          if (records[i].accepted) {
            first_accept = i;
            return true;
          }
        }
        return false;
      });

  result.trials.assign(records.begin(), records.begin() + evaluated);
  result.trials_run = evaluated;

  int chosen = -1;
  if (cfg.best_of_budget) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < evaluated; ++i) {
      if (records[i].accepted && records[i].l_value < best) {
        best = records[i].l_value;
        chosen = i;
      }
    }
  } else {
    chosen = first_accept;
  }
  if (chosen >= 0) {
    result.accepted = candidates[chosen];
    result.distance = records[chosen].distance;
    result.l_estimate.value = records[chosen].l_value;
    result.l_estimate.se = records[chosen].l_se;
    result.l_estimate.seed = cfg.seed;
    result.l_estimate.method = estimators::l_method_name(cfg.l_method);
  }
  return result;
}

double DeviationProfile::log_log_slope() const {
  std::vector<double> xs, ys;
  const double floor = 0.5 / std::max(1, n_subspaces);
  for (const auto& row : rows) {
    if (row.t <= 1.0) continue;
    xs.push_back(std::log(row.t));
    ys.push_back(std::log(std::max(row.tail, floor)));
  }
  if (xs.size() < 2) return 0.0;
  return stats::regression_slope(xs, ys);
}

DeviationProfile deviation_profile(const Measure& mu, int k,
                                   const std::vector<double>& t_grid, int n_f,
                                   LMethod method,
                                   const EstimatorBudget& budget,
                                   std::uint64_t seed, int workers) {
  const int n = mu.dim();
  DeviationProfile prof;
  prof.n_subspaces = n_f;
  prof.l_values.resize(n_f);
  RngStream root(seed);
  auto eval = [&](int j) {
    RngStream sub = root.child(static_cast<std::uint64_t>(j));
    RngStream frng = sub.child(0);
    RngStream erng = sub.child(1);
    const Subspace f = grassmann::haar_sample(n, k, frng);
    prof.l_values[j] =
        estimators::marginal_L(mu, f, method, budget, erng).value;
  };
  chunked_for(n_f, workers, eval, [](int) { return false; });

  prof.median = stats::median(prof.l_values);
  for (double t : t_grid) {
    std::int64_t count = 0;
    for (double l : prof.l_values)
      if (l >= prof.median * t) ++count;
    const auto ci = stats::binomial_ci(count, n_f);
    prof.rows.push_back({t, ci.p, ci.lo, ci.hi});
  }
  return prof;
}

StabilityReport stability_check(const Measure& mu, int k, int pair_count,
                                const EstimatorBudget& budget,
                                std::uint64_t seed) {
  if (k < 1 || k > 3)
    throw std::invalid_argument("stability_check: k must be <= 3");
  const int n = mu.dim();
  RngStream root(seed);
  StabilityReport rep;

  // Exact part: the support polytope when the measure has one.
  std::optional<geometry::ConvexBody> body;
  if (const auto h = mu.support_halfspaces()) {
    // Vertices of the support polytope; cube and cross-polytope supports
    // come with few enough facets or vertices for the exact path.
    const auto d = mu.descriptor();
    if (d.name == "cube") {
      body = geometry::ConvexBody::cube(n, std::sqrt(3.0));
    } else if (d.name == "lp_ball" && d.params.at(0) == 1.0) {
      body = geometry::ConvexBody::cross_polytope(
          n, std::sqrt(0.5 * (n + 1.0) * (n + 2.0)));
    }
  }
  if (body) {
    const geometry::Radii r = geometry::radii(*body, 512, root.child(1));
    rep.body_radius_ratio = r.ratio();
  }

  const geometry::ConvexBody zk =
      geometry::zq_body(mu, k, budget.n_samples, root.child(2));
  // d_G of the centroid body drives the Lipschitz constant for the L ratio.
  {
    RngStream zr = root.child(3);
    const Eigen::MatrixXd dirs = geometry::direction_set(n, 256, zr);
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dirs.cols(); ++i) {
      const double h = zk.support(dirs.col(i));
      hi = std::max(hi, h);
      lo = std::min(lo, h);
    }
    rep.zk_radius_ratio = hi / lo;
  }

  // The Monte Carlo L-ratio side is far more expensive than the exact hull
  // volumes, so it runs on a capped subset of the pairs.
  const int l_pairs = std::min(pair_count, 32);
  for (int p = 0; p < pair_count; ++p) {
    RngStream prng = root.child(100 + p);
    RngStream f1 = prng.child(0);
    RngStream f2 = prng.child(1);
    const Subspace e = grassmann::haar_sample(n, k, f1);
    const Subspace f = grassmann::haar_sample(n, k, f2);
    StabilityPair pair;
    pair.distance = grassmann::metric_d(e, f);

    if (body) {
      const double ve =
          geometry::volume_exact(geometry::project_body(*body, e));
      const double vf =
          geometry::volume_exact(geometry::project_body(*body, f));
      const double re = std::pow(ve, 1.0 / k);
      const double rf = std::pow(vf, 1.0 / k);
      pair.body_ratio = std::max(re / rf, rf / re);
      pair.body_bound = 1.0 + rep.body_radius_ratio * pair.distance;
      pair.body_ok = pair.body_ratio <= pair.body_bound * (1.0 + 1e-9);
      if (!pair.body_ok) ++rep.body_violations;
    }

    if (p < l_pairs) {
      RngStream le_rng = prng.child(2);
      RngStream lf_rng = prng.child(3);
      const double le =
          estimators::marginal_L(mu, e, LMethod::kVolumetric, budget, le_rng)
              .value;
      const double lf =
          estimators::marginal_L(mu, f, LMethod::kVolumetric, budget, lf_rng)
              .value;
      if (le > 0.0 && lf > 0.0) {
        pair.l_ratio = std::max(le / lf, lf / le);
        pair.l_bound = 1.0 + rep.zk_radius_ratio * pair.distance;
        // CI slack: volumetric marginals carry bracket-width noise.
        pair.l_ok = pair.l_ratio <= pair.l_bound * 1.25;
        if (!pair.l_ok) ++rep.l_violations;
      }
    }
    rep.pairs.push_back(pair);
  }
  return rep;
}

SharpnessReport sharpness_demo(const Measure& base, double lambda, int n,
                               int n_scan, const EstimatorBudget& budget,
                               std::uint64_t seed) {
  const int k = static_cast<int>(std::llround(lambda * n));
  if (k < 1 || k >= n || std::abs(lambda * n - k) > 1e-9)
    throw std::invalid_argument("sharpness_demo: lambda n must be an integer in [1, n)");
  if (base.dim() != k)
    throw std::invalid_argument("sharpness_demo: base must live on lambda n coordinates");

  RngStream root(seed);
  const Measure nu = measures::product(base, measures::gaussian(n - k));

  SharpnessReport rep;
  {
    RngStream r = root.child(1);
    rep.l_base = estimators::isotropic_constant_density(base, budget, r);
  }
  {
    RngStream r = root.child(2);
    rep.l_product = estimators::isotropic_constant_density(nu, budget, r);
  }
  {
    // Coordinate marginal onto the base factor.
    const Subspace coord = Subspace::coordinate(n, k);
    RngStream r = root.child(3);
    rep.l_coordinate_marginal =
        estimators::marginal_L(nu, coord, LMethod::kDensity, budget, r);
  }
  rep.lifted_value =
      std::pow(std::exp(-1.0) * rep.l_product.value, 1.0 / lambda);
  rep.lifted_below_base =
      rep.lifted_value <=
      rep.l_base.value + 3.0 * std::max(rep.l_base.se, rep.l_product.se);

  rep.max_marginal_l = 0.0;
  for (int j = 0; j < n_scan; ++j) {
    RngStream sub = root.child(1000 + j);
    RngStream frng = sub.child(0);
    RngStream erng = sub.child(1);
    const Subspace f = grassmann::haar_sample(n, k, frng);
    const double l =
        estimators::marginal_L(nu, f, LMethod::kDensity, budget, erng).value;
    rep.scanned_l.push_back(l);
    rep.max_marginal_l = std::max(rep.max_marginal_l, l);
  }
  if (rep.l_product.value > 0.0)
    rep.implied_constant =
        std::pow(rep.max_marginal_l, lambda) / rep.l_product.value;
  return rep;
}

}  // namespace grasslab::search
