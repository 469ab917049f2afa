#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grasslab/estimate.hpp"
#include "grasslab/estimators.hpp"
#include "grasslab/grassmann.hpp"
#include "grasslab/measures.hpp"

namespace grasslab::search {

using estimators::EstimatorBudget;
using estimators::LMethod;
using grassmann::Metric;
using grassmann::Subspace;
using measures::Measure;

struct SearchConfig {
  double epsilon = 0.3;
  Metric metric = Metric::kMinRotation;
  double beta = 1.0;
  double accept_constant = 10.0;  // C in the acceptance threshold
  int max_trials = 50;
  LMethod l_method = LMethod::kDensity;
  std::uint64_t seed = 0;
  int workers = 1;
  bool best_of_budget = false;
  EstimatorBudget budget;

  /// C * beta / epsilon^(1 - k/n); computed once per search and recorded.
  double threshold(int n, int k) const;
};

struct TrialRecord {
  int index = 0;
  std::string subspace_digest;
  double distance = 0.0;
  double l_value = 0.0;
  double l_se = 0.0;
  bool accepted = false;
};

struct SearchResult {
  std::optional<Subspace> accepted;
  EstimateWithCI l_estimate;
  double distance = 0.0;
  double threshold = 0.0;
  int trials_run = 0;
  std::vector<TrialRecord> trials;
};

/// Randomized neighborhood search: sample candidates in the metric ball of
/// radius epsilon around E, estimate the marginal isotropic constant, accept
/// when value + 2 se clears the threshold. Trials are evaluated in fixed
/// chunks; each trial runs on its own substream, so the log is identical for
/// any worker count. Exhausting max_trials returns the log with no accepted
/// subspace (a recorded outcome, not an error).
SearchResult neighborhood_search(const Measure& mu, const Subspace& center,
                                 const SearchConfig& cfg);

struct DeviationRow {
  double t = 0.0;
  double tail = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct DeviationProfile {
  double median = 0.0;
  int n_subspaces = 0;
  std::vector<double> l_values;
  std::vector<DeviationRow> rows;
  /// Least-squares slope of log tail against log t, with empty-tail entries
  /// floored at half a count.
  double log_log_slope() const;
};

/// Tail fractions of { F : L(marginal on F) >= median * t } over Haar F.
DeviationProfile deviation_profile(const Measure& mu, int k,
                                   const std::vector<double>& t_grid, int n_f,
                                   LMethod method,
                                   const EstimatorBudget& budget,
                                   std::uint64_t seed, int workers = 1);

struct StabilityPair {
  double distance = 0.0;
  double body_ratio = 0.0;   // |P_E K|^{1/k} / |P_F K|^{1/k}, max orientation
  double body_bound = 0.0;   // 1 + t d(E,F)
  double l_ratio = 0.0;      // marginal L ratio, max orientation
  double l_bound = 0.0;
  bool body_ok = false;
  bool l_ok = false;
};

struct StabilityReport {
  double body_radius_ratio = 0.0;  // d_G(K, ball)
  double zk_radius_ratio = 0.0;    // d_G(Z_k, ball)
  int body_violations = 0;
  int l_violations = 0;
  std::vector<StabilityPair> pairs;
};

/// Projection-volume sandwich with exact projected hulls on the support
/// polytope of mu (when it has one), plus a Monte Carlo check of the
/// marginal-L Lipschitz ratio against d_G(Z_k(mu), ball).
StabilityReport stability_check(const Measure& mu, int k, int pair_count,
                                const EstimatorBudget& budget,
                                std::uint64_t seed);

struct SharpnessReport {
  EstimateWithCI l_base;
  EstimateWithCI l_product;          // L of base x gaussian((1-lambda) n)
  EstimateWithCI l_coordinate_marginal;
  double lifted_value = 0.0;         // (e^{-1} L_product)^{1/lambda}
  bool lifted_below_base = false;
  double max_marginal_l = 0.0;       // max over scanned Haar F
  double implied_constant = 0.0;     // max_marginal^lambda / L_product
  std::vector<double> scanned_l;
};

/// Product-with-Gaussian construction: checks the coordinate marginal
/// recovers the base constant and reports the scan of random marginals
/// against the power-law shape.
SharpnessReport sharpness_demo(const Measure& base, double lambda, int n,
                               int n_scan, const EstimatorBudget& budget,
                               std::uint64_t seed);

}  // namespace grasslab::search
