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

#ifndef STEINEST_EXPERIMENT_H_
#define STEINEST_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/estimators.h"
#include "steinest/kernel.h"
#include "steinest/model.h"
#include "steinest/optim.h"
#include "steinest/robust.h"

namespace steinest {

using Json = nlohmann::json;

// Id plus named numeric parameters, e.g. {"id": "imq", "c": 1, "beta": -0.5}.
struct ComponentConfig {
  std::string id;
  Hyper params;
};

struct FitConfig {
  std::string method = "grid";  // grid | sgd | closed_form
  std::vector<int> free;        // fitted coordinates; empty means all
  double lo = -10.0;            // grid bracket for the single free coordinate
  double hi = 10.0;
  int grid_points = 81;
  double tol = 1e-6;            // golden-section tolerance, 0 = grid only
  std::optional<Vector> theta0; // sgd start, defaults to theta_star
  OptimConfig optim;
};

struct ScanConfig {
  int coord = 0;
  double lo = -2.0;
  double hi = 2.0;
  int points = 81;
};

struct InfluenceGridConfig {
  double lo = -20.0;
  double hi = 20.0;
  int points = 161;
};

struct ExperimentConfig {
  std::string model;
  Hyper model_hyper;
  Vector theta_star;
  std::string sampler;  // defaults to model
  Hyper sampler_hyper;  // defaults to model_hyper
  Index n = 0;
  Index corruption_count = 0;
  Vector corruption_value;
  std::string estimator = "dksd";  // sm | dsm | ksd | dksd | nnsm | nnksd
  ComponentConfig kernel{"gaussian", {{"lengthscale", 1.0}}};
  ComponentConfig diffusion{"identity", {}};
  FitConfig fit;
  ScanConfig scan;
  InfluenceGridConfig influence;
  std::vector<Index> clt_n;
  int replications = 1;
  std::uint64_t seed = 0;
  double ridge = kDefaultRidge;
  bool timing = false;
  std::string output = "out";
};

// Strict parse: unknown keys, wrong types and missing required fields
// (model, theta_star, n) raise ConfigError.
ExperimentConfig ParseExperimentConfig(const Json& j);
ExperimentConfig LoadExperimentConfig(const std::string& path);
Json ExperimentConfigToJson(const ExperimentConfig& cfg);

bool IsKernelEstimator(const std::string& estimator);

// Everything needed to evaluate and fit one estimator.
struct Estimator {
  std::string kind;
  ModelPtr model;
  std::optional<MatrixKernel> kernel;  // kernel estimators only
  DiffusionPtr m;
  ObjectivePtr objective;              // full parameter vector
};
Estimator BuildEstimator(const ExperimentConfig& cfg);

// Data for replication `rep`: a draw at theta_star, then corruption.
Sample DrawReplication(const ExperimentConfig& cfg, int rep);

struct FitOutcome {
  Vector theta;
  double loss = 0.0;
};
FitOutcome FitSample(const ExperimentConfig& cfg, const Estimator& est,
                     const Sample& sample, int rep);

// Plug-in sandwich covariance of the free coordinates at theta.
Matrix SandwichAt(const ExperimentConfig& cfg, const Estimator& est,
                  const Vector& theta, const Sample& sample);

struct Replication {
  int rep = 0;
  bool ok = false;
  Vector theta_hat;
  double loss = 0.0;
  double millis = 0.0;
  std::string error;
};

struct RunResult {
  std::vector<Replication> reps;
  Vector median;
  Vector mad;
  std::optional<Matrix> sandwich;
  std::string sandwich_error;
  int ok_count = 0;
};

// Throws NumericalError only when every replication fails.
RunResult RunExperiment(const ExperimentConfig& cfg);
std::string RepsCsv(const RunResult& r);
Json RunSummaryJson(const ExperimentConfig& cfg, const RunResult& r);

// Grid scan of the configured estimator on replication 0.
std::vector<GridRow> ScanExperiment(const ExperimentConfig& cfg);

// Fit on replication 0, then the influence curve over the configured grid
// (one-dimensional data) at the fit.
std::vector<InfluenceRow> InfluenceExperiment(const ExperimentConfig& cfg,
                                              Vector* fitted = nullptr);

struct CltEntry {
  Index n = 0;
  int i = 0;
  int j = 0;
  double empirical = 0.0;
  double sandwich = 0.0;
  double ratio = 0.0;
};
struct CltCoordinate {
  Index n = 0;
  int coord = 0;
  double ppcc = 0.0;  // normal probability plot correlation
};
struct CltResult {
  std::vector<CltEntry> entries;
  std::vector<CltCoordinate> normality;
  int failed = 0;
};
CltResult CltStudy(const ExperimentConfig& cfg);
std::string CltCsv(const CltResult& r);
Json CltSummaryJson(const CltResult& r);

// Correlation between sorted values and normal quantiles at Blom positions.
double NormalProbabilityCorrelation(std::vector<double> values);

double Median(std::vector<double> v);

// Writes `text` to `dir`/`name`, creating the directory.
void WriteTextFile(const std::string& dir, const std::string& name,
                   const std::string& text);

struct PresetOptions {
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool timing = false;
  int replications = 0;  // 0 keeps the preset default
};

std::vector<std::string> PresetIds();
// Runs a preset, writes its files under out_dir and returns the summary
// that is also written as summary.json.
Json RunPreset(const std::string& name, const PresetOptions& opt);

}  // namespace steinest

#endif  // STEINEST_EXPERIMENT_H_
