#include "maxem/hmm.hpp"
#include "maxem/lrtest.hpp"
#include "maxem/oracle.hpp"
#include "maxem/select.hpp"
#include "maxem/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace maxem;

namespace {

// Row-major copy of an n x p covariate array; None means no covariates.
Dataset make_dataset(ModelKind kind, const Eigen::VectorXd& y, const std::optional<RowMatrix>& x,
                     const std::optional<Eigen::VectorXd>& events) {
  RowMatrix cov = x ? *x : RowMatrix(y.size(), 0);
  Eigen::VectorXd ev;
  if (kind == ModelKind::WeibullAft) {
    ev = events ? *events : Eigen::VectorXd::Ones(y.size());
  } else if (events) {
    throw DataError("events are only used by the aft model");
  }
  return Dataset(response_kind_for(kind), y, std::move(cov), std::move(ev));
}

struct Problem {
  Dataset data;
  std::unique_ptr<EmissionModel> model;
};

Problem problem(const std::string& model, const Eigen::VectorXd& y, const std::optional<RowMatrix>& x,
                const std::optional<Eigen::VectorXd>& events) {
  const ModelKind kind = parse_model_kind(model);
  Dataset data = make_dataset(kind, y, x, events);
  auto m = make_model(kind, data.num_covariates());
  m->check(data);
  return {std::move(data), std::move(m)};
}

}  // namespace

PYBIND11_MODULE(_maxem, m) {
  m.doc() = "Segmented likelihood models: max-EM fitting, exhaustive search and the one-breakpoint test";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  py::class_<SegmentedFit>(m, "SegmentedFit")
      .def_property_readonly("breakpoints", [](const SegmentedFit& f) { return f.segmentation.breakpoints(); })
      .def_property_readonly("labels", [](const SegmentedFit& f) { return f.segmentation.labels(); })
      .def_readonly("thetas", &SegmentedFit::thetas)
      .def_readonly("loglik", &SegmentedFit::loglik)
      .def_readonly("iterations", &SegmentedFit::iterations)
      .def_readonly("converged", &SegmentedFit::converged)
      .def_readonly("degenerate", &SegmentedFit::degenerate)
      .def_readonly("trace", &SegmentedFit::trace)
      .def("__repr__", [](const SegmentedFit& f) {
        return "<SegmentedFit breakpoints=" + to_string(f.segmentation) + " loglik=" + format_double(f.loglik) + ">";
      });

  py::class_<LrTestResult>(m, "LrTestResult")
      .def_property_readonly("statistic", [](const LrTestResult& r) { return r.curve.t_n; })
      .def_property_readonly("n1_hat", [](const LrTestResult& r) { return r.curve.n1_hat; })
      .def_property_readonly("p_value", [](const LrTestResult& r) { return r.permutation.p_value; })
      .def_property_readonly("q95", [](const LrTestResult& r) { return r.permutation.q95; })
      .def_property_readonly("null_statistics", [](const LrTestResult& r) { return r.permutation.null_statistics; })
      .def_property_readonly("curve", [](const LrTestResult& r) {
        std::vector<Index> n1;
        std::vector<double> stat;
        for (const auto& p : r.curve.points) {
          n1.push_back(p.n1);
          stat.push_back(p.statistic);
        }
        return py::make_tuple(n1, stat);
      });

  m.def(
      "fit",
      [](const Eigen::VectorXd& y, const std::string& model, Index k, const std::optional<RowMatrix>& x,
         const std::optional<Eigen::VectorXd>& events, const std::string& init, unsigned threads) {
        const Problem p = problem(model, y, x, events);
        PipelineOptions opts;
        opts.init = parse_init_method(init);
        opts.search.threads = threads;
        py::gil_scoped_release release;
        return run_pipeline(p.data, *p.model, k, opts).fit;
      },
      py::arg("y"), py::arg("model") = "mean", py::arg("k") = 2, py::arg("x") = py::none(),
      py::arg("events") = py::none(), py::arg("init") = "bs", py::arg("threads") = 0,
      "Candidate pool plus combination search for a K-segment model.");

  m.def(
      "max_em",
      [](const Eigen::VectorXd& y, const std::string& model, const std::vector<Index>& breakpoints,
         const std::optional<RowMatrix>& x, const std::optional<Eigen::VectorXd>& events) {
        const Problem p = problem(model, y, x, events);
        return max_em(p.data, *p.model, Segmentation(p.data.size(), breakpoints));
      },
      py::arg("y"), py::arg("model"), py::arg("breakpoints"), py::arg("x") = py::none(),
      py::arg("events") = py::none(), "max-EM from the given initial breakpoints.");

  m.def(
      "brute_force",
      [](const Eigen::VectorXd& y, const std::string& model, Index k, const std::optional<RowMatrix>& x,
         const std::optional<Eigen::VectorXd>& events) {
        const Problem p = problem(model, y, x, events);
        py::gil_scoped_release release;
        return brute_force(p.data, *p.model, k);
      },
      py::arg("y"), py::arg("model"), py::arg("k"), py::arg("x") = py::none(), py::arg("events") = py::none(),
      "Exact K-segment maximizer by enumeration.");

  m.def(
      "select_k",
      [](const Eigen::VectorXd& y, const std::string& model, Index k_min, Index k_max,
         const std::optional<RowMatrix>& x, const std::optional<Eigen::VectorXd>& events, const std::string& init) {
        const Problem p = problem(model, y, x, events);
        PipelineOptions opts;
        opts.init = parse_init_method(init);
        SelectionReport rep;
        {
          py::gil_scoped_release release;
          rep = select_k(p.data, *p.model, k_min, k_max, opts);
        }
        py::dict bics;
        for (const auto& e : rep.entries) bics[py::int_(e.segments)] = e.bic;
        return py::make_tuple(rep.chosen, rep.best().fit, bics);
      },
      py::arg("y"), py::arg("model"), py::arg("k_min"), py::arg("k_max"), py::arg("x") = py::none(),
      py::arg("events") = py::none(), py::arg("init") = "bs",
      "BIC selection of K; returns (chosen K, its fit, {K: BIC}).");

  m.def(
      "lr_test",
      [](const Eigen::VectorXd& y, const std::string& model, const std::optional<RowMatrix>& x,
         const std::optional<Eigen::VectorXd>& events, Index permutations, std::uint64_t seed, Index t_low,
         unsigned threads) {
        const Problem p = problem(model, y, x, events);
        LrOptions opts;
        opts.t_low = t_low;
        py::gil_scoped_release release;
        return permutation_test(p.data, *p.model, permutations, seed, opts, threads);
      },
      py::arg("y"), py::arg("model"), py::arg("x") = py::none(), py::arg("events") = py::none(),
      py::arg("permutations") = 1000, py::arg("seed") = 1, py::arg("t_low") = 100, py::arg("threads") = 0,
      "One-breakpoint likelihood-ratio permutation test.");

  m.def(
      "posterior_weights",
      [](const Eigen::MatrixXd& log_emissions) {
        const PosteriorWeights w = forward_backward(log_emissions);
        return py::make_tuple(w.weights, w.log_evidence);
      },
      py::arg("log_emissions"), "Posterior segment probabilities and log evidence for an n x K emission table.");

  m.def(
      "map_breakpoints",
      [](const Eigen::MatrixXd& log_emissions) {
        return map_decode(max_forward_backward(log_emissions)).breakpoints();
      },
      py::arg("log_emissions"), "Breakpoints of the most probable segmentation for an n x K emission table.");

  m.def("preset_names", &preset_names);

  m.def(
      "simulate",
      [](const std::string& preset, std::uint64_t seed) {
        const Scenario sc = load_scenario(preset);
        const GeneratedSample s = generate(sc, seed);
        py::dict out;
        out["model"] = to_string(sc.model);
        out["y"] = Eigen::VectorXd(s.data.responses());
        out["x"] = RowMatrix(s.data.covariates());
        out["events"] = sc.model == ModelKind::WeibullAft ? py::object(py::cast(Eigen::VectorXd(s.data.events())))
                                                          : py::object(py::none());
        out["breakpoints"] = s.truth.breakpoints();
        return out;
      },
      py::arg("preset"), py::arg("seed") = 1, "Generate one sample from a bundled scenario preset.");
}
