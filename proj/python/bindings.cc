// Copyright 2026 The steinest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings: component evaluation plus the experiment drivers.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "steinest/estimators.h"
#include "steinest/experiment.h"
#include "steinest/expfam.h"
#include "steinest/sampling.h"
#include "steinest/stein_kernel.h"

namespace py = pybind11;

namespace steinest {
namespace {

// JSON crosses the boundary as text; the Python side calls json.loads.
std::string Dump(const Json& j) { return j.dump(); }

std::pair<double, Vector> Dksd(const std::string& model, const Vector& theta, const RowMatrix& x,
                               const std::string& kernel, const Hyper& kernel_hyper,
                               const std::string& diffusion, const Hyper& diffusion_hyper,
                               const Hyper& model_hyper) {
  const ModelPtr m = BuiltinModel(model, model_hyper);
  m->CheckTheta(theta);
  const MatrixKernel k = MatrixKernel::ScaledIdentity(m->dim_x(), BuiltinScalarKernel(kernel, kernel_hyper));
  const SteinKernelCtx ctx(m, k, BuiltinDiffusion(diffusion, diffusion_hyper), theta, Sample(x));
  const LossReport r = DksdEvaluate(ctx, kWantValue | kWantGrad);
  return {r.value, *r.grad};
}

std::pair<double, Vector> Dsm(const std::string& model, const Vector& theta, const RowMatrix& x,
                              const std::string& diffusion, const Hyper& diffusion_hyper,
                              const Hyper& model_hyper) {
  const ModelPtr m = BuiltinModel(model, model_hyper);
  m->CheckTheta(theta);
  const DiffusionPtr d = BuiltinDiffusion(diffusion, diffusion_hyper);
  const Sample s(x);
  return {DsmLoss(*m, *d, theta, s), DsmGrad(*m, *d, theta, s)};
}

Vector ClosedForm(const std::string& family, const std::string& loss, const RowMatrix& x,
                  const std::string& kernel, const Hyper& kernel_hyper, const std::string& diffusion,
                  const Hyper& diffusion_hyper, const Hyper& family_hyper) {
  const ExpFamPtr spec = BuiltinExpFam(family, family_hyper);
  const DiffusionPtr d = BuiltinDiffusion(diffusion, diffusion_hyper);
  const Sample s(x);
  if (loss == "dsm") return SolveQuadratic(DsmQuadratic(*spec, *d, s));
  if (loss != "dksd") throw ConfigError("loss must be 'dksd' or 'dsm'");
  const MatrixKernel k = MatrixKernel::ScaledIdentity(spec->dim_x(), BuiltinScalarKernel(kernel, kernel_hyper));
  return SolveQuadratic(DksdQuadratic(*spec, k, *d, s));
}

std::string Experiment(const std::string& config_json) {
  const ExperimentConfig cfg = ParseExperimentConfig(Json::parse(config_json));
  return Dump(RunSummaryJson(cfg, RunExperiment(cfg)));
}

std::string Preset(const std::string& name, const std::string& out_dir, std::uint64_t seed,
                   int replications) {
  PresetOptions opt;
  opt.out_dir = out_dir;
  opt.seed = seed;
  opt.replications = replications;
  return Dump(RunPreset(name, opt));
}

}  // namespace
}  // namespace steinest

PYBIND11_MODULE(_steinest, m) {
  using namespace steinest;
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("models", &BuiltinModelIds);
  m.def("kernels", &BuiltinKernelIds);
  m.def("diffusions", &BuiltinDiffusionIds);
  m.def("presets", &PresetIds);

  m.def(
      "sample",
      [](const std::string& name, const Vector& theta, Index n, std::uint64_t seed, const Hyper& hyper) {
        return SampleFrom(name, theta, n, seed, hyper).data();
      },
      py::arg("name"), py::arg("theta"), py::arg("n"), py::arg("seed") = 0, py::arg("hyper") = Hyper{});
  m.def("dksd", &Dksd, py::arg("model"), py::arg("theta"), py::arg("x"), py::arg("kernel") = "gaussian",
        py::arg("kernel_hyper") = Hyper{}, py::arg("diffusion") = "identity",
        py::arg("diffusion_hyper") = Hyper{}, py::arg("model_hyper") = Hyper{},
        "DKSD U-statistic and its theta-gradient.");
  m.def("dsm", &Dsm, py::arg("model"), py::arg("theta"), py::arg("x"), py::arg("diffusion") = "identity",
        py::arg("diffusion_hyper") = Hyper{}, py::arg("model_hyper") = Hyper{},
        "DSM empirical loss and its theta-gradient.");
  m.def("closed_form", &ClosedForm, py::arg("family"), py::arg("loss"), py::arg("x"),
        py::arg("kernel") = "gaussian", py::arg("kernel_hyper") = Hyper{}, py::arg("diffusion") = "identity",
        py::arg("diffusion_hyper") = Hyper{}, py::arg("family_hyper") = Hyper{});
  m.def("_run_experiment", &Experiment, py::call_guard<py::gil_scoped_release>());
  m.def("_run_preset", &Preset, py::arg("name"), py::arg("out_dir"), py::arg("seed") = 0,
        py::arg("replications") = 0, py::call_guard<py::gil_scoped_release>());
}
