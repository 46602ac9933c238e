#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fkrig/analysis.hpp"
#include "fkrig/commands.hpp"
#include "fkrig/config.hpp"
#include "fkrig/errors.hpp"
#include "fkrig/io.hpp"
#include "fkrig/pipeline.hpp"

namespace py = pybind11;
using namespace fkrig;

namespace {

FunctionalDataset make_dataset(const MatrixXd& design, const std::vector<VectorXd>& t,
                               const std::vector<VectorXd>& y, std::vector<VarKind> kinds,
                               std::vector<std::string> names) {
  if (kinds.empty()) kinds = infer_continuous_kinds(design);
  if (names.empty()) names = default_names(design.cols());
  FunctionalDataset d;
  d.design = Design(std::move(names), std::move(kinds), design);
  d.t = t;
  d.y = y;
  d.validate();
  return d;
}

py::dict em_summary(const EMResult& em) {
  py::dict out;
  out["iterations"] = em.iterations;
  out["converged"] = em.converged;
  out["prop2"] = em.prop2;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kriging for functional data on Kronecker-structured grids";

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  (void)input_error;

  py::class_<VarKind>(m, "VarKind")
      .def_static("continuous", &VarKind::continuous, py::arg("lo"), py::arg("hi"))
      .def_static("categorical", &VarKind::categorical, py::arg("levels"))
      .def_property_readonly("is_categorical", &VarKind::is_categorical)
      .def_readonly("lo", &VarKind::lo)
      .def_readonly("hi", &VarKind::hi)
      .def_readonly("levels", &VarKind::levels)
      .def("__eq__", [](const VarKind& a, const VarKind& b) { return a == b; });

  py::class_<ProjectConfig>(m, "Config")
      .def(py::init<>())
      .def_static("load", &ProjectConfig::load, py::arg("path"))
      .def_static("parse", &ProjectConfig::parse, py::arg("text"), py::arg("base") = std::filesystem::path("."))
      .def_static("keys", &ProjectConfig::keys)
      .def("set", &ProjectConfig::set, py::arg("key"), py::arg("value"))
      .def("get", &ProjectConfig::get, py::arg("key"))
      .def("to_text", &ProjectConfig::to_text)
      .def_readwrite("base_dir", &ProjectConfig::base_dir);

  py::class_<FunctionalDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("design"), py::arg("t"), py::arg("y"),
           py::arg("kinds") = std::vector<VarKind>{}, py::arg("names") = std::vector<std::string>{})
      .def_property_readonly("design", [](const FunctionalDataset& d) { return d.design.rows; })
      .def_property_readonly("names", [](const FunctionalDataset& d) { return d.design.names; })
      .def_property_readonly("kinds", [](const FunctionalDataset& d) { return d.design.kinds; })
      .def_readonly("t", &FunctionalDataset::t)
      .def_readonly("y", &FunctionalDataset::y)
      .def_property_readonly("runs", &FunctionalDataset::runs)
      .def("is_regular", &FunctionalDataset::is_regular)
      .def("union_grid", &FunctionalDataset::union_grid);

  py::class_<KrigingModel>(m, "Model")
      .def("predict", &KrigingModel::predict, py::arg("x"), py::arg("t"))
      .def("predict_profile", &KrigingModel::predict_profile, py::arg("x"), py::arg("t"))
      .def(
          "predict_ci",
          [](const KrigingModel& km, const VectorXd& x, double t, double kappa) {
            const Interval i = km.predict_ci(x, t, kappa);
            return py::make_tuple(i.center, i.lo, i.hi);
          },
          py::arg("x"), py::arg("t"), py::arg("kappa") = 0.05)
      .def("predict_rows", [](const KrigingModel& km, const MatrixXd& q, double kappa) { return predict_rows(km, q, kappa); },
           py::arg("query"), py::arg("kappa") = 0.05)
      .def_property_readonly("grid", &KrigingModel::grid)
      .def_property_readonly("design", [](const KrigingModel& km) { return km.design().rows; })
      .def_property_readonly("completed", [](const KrigingModel& km) { return km.data().y; })
      .def_property_readonly("alphas", [](const KrigingModel& km) { return km.params().alphas; })
      .def_property_readonly("beta", [](const KrigingModel& km) { return km.params().beta; })
      .def_property_readonly("d", [](const KrigingModel& km) { return km.params().d; })
      .def_property_readonly("nugget", [](const KrigingModel& km) { return km.params().nugget; })
      .def_property_readonly("mu", &KrigingModel::mu)
      .def_property_readonly("sigma2", &KrigingModel::sigma2)
      .def_property_readonly("decay_rate", &KrigingModel::decay_rate)
      .def("loo_residuals", &KrigingModel::loo_residuals)
      .def(
          "save",
          [](const KrigingModel& km, const std::filesystem::path& p) {
            save_model(p, km, MaskMatrix::Constant(km.data().runs(), km.data().points(), true));
          },
          py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p).model; }, py::arg("path"))
      .def("to_text", [](const KrigingModel& km) {
        return model_to_text(km, MaskMatrix::Constant(km.data().runs(), km.data().points(), true));
      });

  m.def(
      "generate",
      [](const ProjectConfig& cfg) {
        const GeneratedData g = generate_data(cfg);
        return py::make_tuple(g.data, g.truth.grid, g.truth.y);
      },
      py::arg("config"), "Sample a dataset; returns (dataset, truth_grid, truth_y).");

  m.def(
      "fit",
      [](const FunctionalDataset& data, const ProjectConfig& cfg) {
        const PipelineResult r = run_pipeline(data, pipeline_options(cfg, data.design));
        py::dict info;
        info["irregular"] = r.em.has_value();
        if (r.em) info["em"] = em_summary(*r.em);
        info["report"] = fit_report(r, data);
        return py::make_tuple(r.model, info);
      },
      py::arg("data"), py::arg("config") = ProjectConfig{},
      "Fit the two-stage model, with EM completion for irregular data; returns (model, info).");

  m.def(
      "validate",
      [](const FunctionalDataset& data, const ProjectConfig& cfg, std::vector<Index> probes) {
        if (probes.empty()) probes = default_probes(data.runs());
        const PipelineOptions opts = pipeline_options(cfg, data.design);
        return py::make_tuple(mscv(data, pipeline_procedure(opts), probes),
                              mscv(data, common_grid_procedure(opts), probes));
      },
      py::arg("data"), py::arg("config") = ProjectConfig{}, py::arg("probes") = std::vector<Index>{},
      "Leave-one-run-out MSCV of the EM model and of the common-grid model.");

  m.def(
      "max_over_t",
      [](const KrigingModel& km, const VectorXd& x, const VectorXd& grid) {
        const MaxOverT r = max_over_t(km, x, grid.size() ? grid : km.grid());
        return py::make_tuple(r.t_star, r.value);
      },
      py::arg("model"), py::arg("x"), py::arg("grid") = VectorXd());

  m.def(
      "minimax",
      [](const KrigingModel& km, const VectorXd& lo, const VectorXd& hi, int restarts, int max_evals,
         uint64_t seed, int refine) {
        OptimOptions o;
        o.restarts = restarts;
        o.max_evals = max_evals;
        o.seed = seed;
        o.refine = refine;
        const OptimResult r = minimax_optimize(km, lo, hi, o);
        py::dict out;
        out["x"] = r.x_star;
        out["worst_t"] = r.worst_t;
        out["value"] = r.worst_value;
        out["max_evals_hit"] = r.max_evals_hit;
        return out;
      },
      py::arg("model"), py::arg("lo"), py::arg("hi"), py::arg("restarts") = 20, py::arg("max_evals") = 2000,
      py::arg("seed") = 1, py::arg("refine") = 1);

  m.def(
      "main_effects",
      [](const KrigingModel& km, Index variable, const VectorXd& levels, int nodes, uint64_t seed) {
        return main_effects(km, variable, levels, nodes, seed).effect;
      },
      py::arg("model"), py::arg("variable"), py::arg("levels"), py::arg("nodes") = 256, py::arg("seed") = 1,
      "Main-effect curves, one row per level and one column per model grid point.");

  m.def(
      "corr_t",
      [](const VectorXd& grid, double beta, int d, double nugget, bool closed_form) {
        const StructuredCorrT rt = build_R_t(grid, beta, d, nugget, closed_form);
        return py::make_tuple(rt.inverse(), rt.log_det(), rt.form() == StructuredCorrT::Form::tridiagonal);
      },
      py::arg("grid"), py::arg("beta"), py::arg("d") = 1, py::arg("nugget") = 0.0, py::arg("closed_form") = true,
      "Inverse and log determinant of the time correlation matrix; the flag reports the closed form.");

  m.def(
      "benchmark",
      [](const ProjectConfig& cfg) {
        const BenchOutput b = run_benchmark(cfg);
        py::list rows;
        for (const auto& r : b.rows) rows.append(py::make_tuple(r.n, r.m, r.path, r.median_seconds, r.value));
        return py::make_tuple(rows, b.max_disagreement);
      },
      py::arg("config"));
}
