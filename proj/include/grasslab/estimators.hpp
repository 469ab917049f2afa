#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grasslab/estimate.hpp"
#include "grasslab/geometry.hpp"
#include "grasslab/grassmann.hpp"
#include "grasslab/measures.hpp"
#include "grasslab/rng.hpp"

namespace grasslab::estimators {

using measures::Measure;

/// Which route computes an isotropic-constant style quantity.
enum class LMethod { kDensity, kVolumetric };
std::string l_method_name(LMethod m);
LMethod l_method_from_name(const std::string& name);

struct EstimatorBudget {
  std::int64_t n_samples = 40000;  // per Monte Carlo integral
  int n_directions = 512;          // per volume bracket
  int n_batches = 10;              // batch count for stderr estimation
};

/// sup-density isotropic constant: |f|_inf^(1/n) det(Cov)^(1/2n). The sup is
/// located by sampling plus local refinement; the bracket
/// f(0) <= |f|_inf <= e^n f(0) is enforced as a sanity gate.
EstimateWithCI isotropic_constant_density(const Measure& mu,
                                          const EstimatorBudget& budget,
                                          const RngStream& rng);

/// Volume-based variant |Z_m(nu)|^(-1/m), reported as a bracket.
EstimateWithCI isotropic_constant_volumetric(const Measure& nu,
                                             const EstimatorBudget& budget,
                                             const RngStream& rng);

/// Isotropic constant of the marginal on F by either route.
EstimateWithCI marginal_L(const Measure& mu, const grassmann::Subspace& f,
                          LMethod method, const EstimatorBudget& budget,
                          const RngStream& rng);

/// Haar average of f_{pi_F mu}(0)^n over G_{n,k}, to the power 1/(kn).
/// All n-th powers live in log space.
EstimateWithCI a_k_average(const Measure& mu, int k, int n_subspaces,
                           std::int64_t n_samples, const RngStream& rng);

/// (integral of |P_F K|^{-n} over Haar F)^(-1/(kn)).
EstimateWithCI affine_quermassintegral(const geometry::ConvexBody& k_body,
                                       int k, int n_subspaces, const RngStream& rng);

/// (integral of |K cap F_perp|^{n} over Haar F)^(1/(kn)); exact sections.
EstimateWithCI dual_affine_quermassintegral(const geometry::ConvexBody& k_body,
                                            int k, int n_subspaces,
                                            const RngStream& rng);

struct QvRow {
  int q = 0;
  double vr_lower = 0.0;     // certified lower end of |Z_q|^{1/n}
  double vr_upper = 0.0;
  double threshold = 0.0;    // (1/beta) sqrt(q/n) det^(1/2n)
  int status = 0;            // +1 certified, -1 refuted, 0 indeterminate
};

struct QvResult {
  double beta = 1.0;
  int q_v = 0;
  bool any_indeterminate = false;
  std::vector<QvRow> profile;
};

/// Integer scan of the volume-ratio parameter; the certificate is
/// pessimistic (uses the low end of each bracket).
QvResult qv_estimate(const Measure& mu, double beta,
                     const EstimatorBudget& budget, const RngStream& rng);

/// ((1/N) sum |x|^q)^(1/q) with delta-method stderr. The admissible range
/// is capped at q >= -(n-1)/2 to keep the Monte Carlo variance finite.
EstimateWithCI iq_moment(const Measure& mu, double q, std::int64_t n_samples,
                         const RngStream& rng);

/// Largest certified p <= (n-1)/2 with I_{-p} >= I_2 / delta; empty when the
/// confidence intervals cannot decide anywhere.
std::optional<double> q_minus_c_estimate(const Measure& mu, double delta,
                                         std::int64_t n_samples,
                                         const RngStream& rng);

}  // namespace grasslab::estimators
