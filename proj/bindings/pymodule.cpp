// Python bindings for the main operations: Grassmannian metrics and
// sampling, the measure zoo, centroid-body support estimation, the scalar
// functionals and the neighborhood search.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "grasslab/estimators.hpp"
#include "grasslab/geometry.hpp"
#include "grasslab/grassmann.hpp"
#include "grasslab/measures.hpp"
#include "grasslab/search.hpp"

namespace py = pybind11;
using namespace grasslab;

namespace {

grassmann::Metric metric_arg(const std::string& name) {
  return grassmann::metric_from_name(name);
}

estimators::LMethod method_arg(const std::string& name) {
  return estimators::l_method_from_name(name);
}

py::dict estimate_dict(const EstimateWithCI& est) {
  py::dict d;
  d["value"] = est.value;
  d["stderr"] = est.se;
  d["n"] = est.n;
  d["seed"] = est.seed;
  d["method"] = est.method;
  if (est.has_bracket()) {
    d["lo"] = est.lo;
    d["hi"] = est.hi;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "numerical toolkit for log-concave marginals on the Grassmannian";

  py::class_<grassmann::Subspace>(m, "Subspace")
      .def(py::init<int, Eigen::MatrixXd>(), py::arg("n"), py::arg("frame"))
      .def_static("from_span", &grassmann::Subspace::from_span)
      .def_static("coordinate", &grassmann::Subspace::coordinate)
      .def_property_readonly("n", &grassmann::Subspace::n)
      .def_property_readonly("k", &grassmann::Subspace::k)
      .def_property_readonly("frame", &grassmann::Subspace::frame)
      .def("projector", &grassmann::Subspace::projector)
      .def("complement", &grassmann::Subspace::complement)
      .def("digest", &grassmann::Subspace::digest)
      .def("__repr__", [](const grassmann::Subspace& s) {
        return "Subspace(n=" + std::to_string(s.n()) +
               ", k=" + std::to_string(s.k()) + ")";
      });

  m.def(
      "principal_angles",
      [](const grassmann::Subspace& e, const grassmann::Subspace& f) {
        return grassmann::principal_angles(e, f).angles;
      },
      py::arg("e"), py::arg("f"));
  m.def("sigma_inf", &grassmann::sigma_inf, py::arg("e"), py::arg("f"));
  m.def("metric_d", &grassmann::metric_d, py::arg("e"), py::arg("f"));
  m.def(
      "haar_sample",
      [](int n, int k, std::uint64_t seed) {
        RngStream rng(seed);
        return grassmann::haar_sample(n, k, rng);
      },
      py::arg("n"), py::arg("k"), py::arg("seed"));
  m.def(
      "ball_sample",
      [](const grassmann::Subspace& center, double delta,
         const std::string& metric, std::uint64_t seed) {
        RngStream rng(seed);
        return grassmann::ball_sample(center, delta, metric_arg(metric), rng);
      },
      py::arg("center"), py::arg("delta"), py::arg("metric") = "d",
      py::arg("seed") = 0);
  m.def(
      "ball_measure",
      [](const grassmann::Subspace& center, double delta,
         const std::string& metric, std::int64_t n, std::uint64_t seed) {
        RngStream rng(seed);
        return estimate_dict(grassmann::ball_measure_estimate(
            center, delta, metric_arg(metric), n, rng));
      },
      py::arg("center"), py::arg("delta"), py::arg("metric") = "d",
      py::arg("n") = 20000, py::arg("seed") = 0);
  m.def(
      "rotation_mapping",
      [](const grassmann::Subspace& e, const grassmann::Subspace& f) {
        return grassmann::rotation_mapping(e, f).matrix;
      },
      py::arg("e"), py::arg("f"));

  py::class_<measures::Measure>(m, "Measure")
      .def_property_readonly("dim", &measures::Measure::dim)
      .def_property_readonly("has_density", &measures::Measure::has_density)
      .def("log_density", &measures::Measure::log_density)
      .def("density", &measures::Measure::density)
      .def("covariance",
           [](const measures::Measure& mu) -> py::object {
             const auto cov = mu.covariance();
             if (!cov) return py::none();
             return py::cast(*cov);
           })
      .def("descriptor",
           [](const measures::Measure& mu) {
             return mu.descriptor().to_string();
           })
      .def(
          "sample",
          [](const measures::Measure& mu, std::int64_t n, std::uint64_t seed) {
            return measures::sample_batch(mu, n, seed).points;
          },
          py::arg("n"), py::arg("seed") = 0)
      .def("__repr__", [](const measures::Measure& mu) {
        return "Measure(" + mu.descriptor().to_string() + ")";
      });

  m.def("measure", [](const std::string& descriptor) {
    return measures::from_descriptor(descriptor);
  });
  m.def("product", &measures::product);
  m.def("gaussian_smoothing", &measures::gaussian_smoothing);
  m.def("marginal", &measures::marginal);
  m.def(
      "marginal_density_at_zero",
      [](const measures::Measure& mu, const grassmann::Subspace& f,
         std::int64_t n, std::uint64_t seed) {
        RngStream rng(seed);
        return estimate_dict(
            measures::marginal_density_at_zero(mu, f, n, rng));
      },
      py::arg("mu"), py::arg("f"), py::arg("n") = 40000, py::arg("seed") = 0);

  m.def(
      "zq_support",
      [](const measures::Measure& mu, double q, const Eigen::VectorXd& y,
         std::int64_t n, std::uint64_t seed) {
        RngStream rng(seed);
        return estimate_dict(geometry::zq_support(mu, q, y, n, rng));
      },
      py::arg("mu"), py::arg("q"), py::arg("y"), py::arg("n") = 40000,
      py::arg("seed") = 0);

  m.def(
      "isotropic_constant",
      [](const measures::Measure& mu, const std::string& method,
         std::int64_t n_samples, int n_directions, std::uint64_t seed) {
        estimators::EstimatorBudget budget;
        budget.n_samples = n_samples;
        budget.n_directions = n_directions;
        RngStream rng(seed);
        if (method_arg(method) == estimators::LMethod::kDensity)
          return estimate_dict(
              estimators::isotropic_constant_density(mu, budget, rng));
        return estimate_dict(
            estimators::isotropic_constant_volumetric(mu, budget, rng));
      },
      py::arg("mu"), py::arg("method") = "density",
      py::arg("n_samples") = 40000, py::arg("n_directions") = 512,
      py::arg("seed") = 0);

  m.def(
      "marginal_l",
      [](const measures::Measure& mu, const grassmann::Subspace& f,
         const std::string& method, std::int64_t n_samples,
         std::uint64_t seed) {
        estimators::EstimatorBudget budget;
        budget.n_samples = n_samples;
        RngStream rng(seed);
        return estimate_dict(
            estimators::marginal_L(mu, f, method_arg(method), budget, rng));
      },
      py::arg("mu"), py::arg("f"), py::arg("method") = "density",
      py::arg("n_samples") = 40000, py::arg("seed") = 0);

  m.def(
      "a_k_average",
      [](const measures::Measure& mu, int k, int n_subspaces,
         std::int64_t n_samples, std::uint64_t seed) {
        RngStream rng(seed);
        return estimate_dict(
            estimators::a_k_average(mu, k, n_subspaces, n_samples, rng));
      },
      py::arg("mu"), py::arg("k"), py::arg("n_subspaces") = 200,
      py::arg("n_samples") = 40000, py::arg("seed") = 0);

  m.def(
      "iq_moment",
      [](const measures::Measure& mu, double q, std::int64_t n,
         std::uint64_t seed) {
        RngStream rng(seed);
        return estimate_dict(estimators::iq_moment(mu, q, n, rng));
      },
      py::arg("mu"), py::arg("q"), py::arg("n") = 40000, py::arg("seed") = 0);

  m.def(
      "neighborhood_search",
      [](const measures::Measure& mu, const grassmann::Subspace& center,
         double epsilon, const std::string& metric, double beta, double c,
         int max_trials, const std::string& l_method, std::uint64_t seed,
         int workers, std::int64_t n_samples) {
        search::SearchConfig cfg;
        cfg.epsilon = epsilon;
        cfg.metric = metric_arg(metric);
        cfg.beta = beta;
        cfg.accept_constant = c;
        cfg.max_trials = max_trials;
        cfg.l_method = method_arg(l_method);
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.budget.n_samples = n_samples;
        const auto result = search::neighborhood_search(mu, center, cfg);
        py::dict d;
        d["threshold"] = result.threshold;
        d["trials_run"] = result.trials_run;
        d["accepted"] = result.accepted.has_value();
        if (result.accepted) {
          d["subspace"] = *result.accepted;
          d["distance"] = result.distance;
          d["L"] = result.l_estimate.value;
          d["L_stderr"] = result.l_estimate.se;
        }
        py::list trials;
        for (const auto& t : result.trials) {
          py::dict row;
          row["index"] = t.index;
          row["digest"] = t.subspace_digest;
          row["distance"] = t.distance;
          row["L"] = t.l_value;
          row["stderr"] = t.l_se;
          row["accepted"] = t.accepted;
          trials.append(row);
        }
        d["trials"] = trials;
        return d;
      },
      py::arg("mu"), py::arg("center"), py::arg("epsilon") = 0.3,
      py::arg("metric") = "d", py::arg("beta") = 1.0, py::arg("c") = 10.0,
      py::arg("max_trials") = 50, py::arg("l_method") = "density",
      py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("n_samples") = 20000);

  m.attr("__version__") = "0.1.0";
}
