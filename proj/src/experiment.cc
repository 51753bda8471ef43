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

#include "steinest/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "steinest/expfam.h"
#include "steinest/sampling.h"
#include "steinest/stein_kernel.h"

namespace steinest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void CheckKeys(const Json& j, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

double Number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

Index Count(const Json& j, const std::string& what) {
  if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>())) {
    throw ConfigError(what + " must be an integer");
  }
  return static_cast<Index>(j.get<double>());
}

std::string Text(const Json& j, const std::string& what) {
  if (!j.is_string()) throw ConfigError(what + " must be a string");
  return j.get<std::string>();
}

Vector Numbers(const Json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(what + " must be a number or an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(k) = Number(j[k], what);
  return v;
}

Hyper HyperFrom(const Json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be an object of numbers");
  Hyper h;
  for (auto it = j.begin(); it != j.end(); ++it) {
    h[it.key()] = Number(it.value(), what + "." + it.key());
  }
  return h;
}

ComponentConfig ComponentFrom(const Json& j, const std::string& what) {
  if (j.is_string()) return {j.get<std::string>(), {}};
  if (!j.is_object() || !j.contains("id")) {
    throw ConfigError(what + " must be an id string or an object with an 'id'");
  }
  ComponentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "id") {
      c.id = Text(it.value(), what + ".id");
    } else {
      c.params[it.key()] = Number(it.value(), what + "." + it.key());
    }
  }
  return c;
}

Json ComponentToJson(const ComponentConfig& c) {
  Json j = Json::object();
  j["id"] = c.id;
  for (const auto& [k, v] : c.params) j[k] = v;
  return j;
}

Json VectorToJson(const Vector& v) {
  Json j = Json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json MatrixToJson(const Matrix& a) {
  Json j = Json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < a.cols(); ++k) row.push_back(a(i, k));
    j.push_back(row);
  }
  return j;
}

void ParseFit(const Json& j, FitConfig* fit) {
  CheckKeys(j,
            {"method", "free", "lo", "hi", "grid_points", "tol", "theta0", "step",
             "schedule", "batch_size", "max_iters", "preconditioner", "ridge",
             "log_space", "converge_tol", "full_loss_every"},
            "fit");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const Json& v = it.value();
    if (k == "method") {
      fit->method = Text(v, "fit.method");
    } else if (k == "free") {
      fit->free.clear();
      const Vector f = Numbers(v, "fit.free");
      for (Index i = 0; i < f.size(); ++i) fit->free.push_back(static_cast<int>(f(i)));
    } else if (k == "lo") {
      fit->lo = Number(v, "fit.lo");
    } else if (k == "hi") {
      fit->hi = Number(v, "fit.hi");
    } else if (k == "grid_points") {
      fit->grid_points = static_cast<int>(Count(v, "fit.grid_points"));
    } else if (k == "tol") {
      fit->tol = Number(v, "fit.tol");
    } else if (k == "theta0") {
      fit->theta0 = Numbers(v, "fit.theta0");
    } else if (k == "step") {
      fit->optim.step = Number(v, "fit.step");
    } else if (k == "schedule") {
      const std::string s = Text(v, "fit.schedule");
      if (s == "constant") {
        fit->optim.schedule = StepSchedule::kConstant;
      } else if (s == "one_over_t") {
        fit->optim.schedule = StepSchedule::kOneOverT;
      } else {
        throw ConfigError("fit.schedule must be 'constant' or 'one_over_t'");
      }
    } else if (k == "batch_size") {
      fit->optim.batch_size = Count(v, "fit.batch_size");
    } else if (k == "max_iters") {
      fit->optim.max_iters = static_cast<int>(Count(v, "fit.max_iters"));
    } else if (k == "preconditioner") {
      const std::string s = Text(v, "fit.preconditioner");
      if (s == "none") {
        fit->optim.preconditioner = Preconditioner::kNone;
      } else if (s == "info") {
        fit->optim.preconditioner = Preconditioner::kInfo;
      } else if (s == "identity") {
        fit->optim.preconditioner = Preconditioner::kIdentity;
      } else {
        throw ConfigError("fit.preconditioner must be 'none', 'info' or 'identity'");
      }
    } else if (k == "ridge") {
      fit->optim.ridge = Number(v, "fit.ridge");
    } else if (k == "log_space") {
      if (!v.is_array()) throw ConfigError("fit.log_space must be an array of booleans");
      fit->optim.log_space.clear();
      for (const Json& b : v) {
        if (!b.is_boolean()) throw ConfigError("fit.log_space must be an array of booleans");
        fit->optim.log_space.push_back(b.get<bool>());
      }
    } else if (k == "converge_tol") {
      fit->optim.tol = Number(v, "fit.converge_tol");
    } else if (k == "full_loss_every") {
      fit->optim.full_loss_every = static_cast<int>(Count(v, "fit.full_loss_every"));
    }
  }
}

std::vector<int> FreeCoords(const ExperimentConfig& cfg, int p) {
  if (cfg.fit.free.empty()) return AllCoordinates(p);
  for (int c : cfg.fit.free) {
    if (c < 0 || c >= p) throw ConfigError("fit.free coordinate " + std::to_string(c) + " out of range");
  }
  return cfg.fit.free;
}

double MillisSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const Json& j) {
  CheckKeys(j,
            {"model", "model_hyper", "theta_star", "sampler", "sampler_hyper", "n",
             "corruption", "estimator", "kernel", "diffusion", "fit", "scan",
             "influence", "clt", "replications", "seed", "ridge", "timing", "output"},
            "experiment config");
  for (const char* req : {"model", "theta_star", "n"}) {
    if (!j.contains(req)) throw ConfigError(std::string("experiment config is missing '") + req + "'");
  }
  ExperimentConfig cfg;
  bool sampler_hyper_set = false;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const Json& v = it.value();
    if (k == "model") {
      cfg.model = Text(v, k);
    } else if (k == "model_hyper") {
      cfg.model_hyper = HyperFrom(v, k);
    } else if (k == "theta_star") {
      cfg.theta_star = Numbers(v, k);
    } else if (k == "sampler") {
      cfg.sampler = Text(v, k);
    } else if (k == "sampler_hyper") {
      cfg.sampler_hyper = HyperFrom(v, k);
      sampler_hyper_set = true;
    } else if (k == "n") {
      cfg.n = Count(v, k);
    } else if (k == "corruption") {
      if (v.is_null()) continue;
      CheckKeys(v, {"count", "value"}, "corruption");
      if (v.contains("count")) cfg.corruption_count = Count(v["count"], "corruption.count");
      if (v.contains("value")) cfg.corruption_value = Numbers(v["value"], "corruption.value");
    } else if (k == "estimator") {
      cfg.estimator = Text(v, k);
    } else if (k == "kernel") {
      cfg.kernel = ComponentFrom(v, k);
    } else if (k == "diffusion") {
      cfg.diffusion = ComponentFrom(v, k);
    } else if (k == "fit") {
      ParseFit(v, &cfg.fit);
    } else if (k == "scan") {
      CheckKeys(v, {"coord", "lo", "hi", "points"}, "scan");
      if (v.contains("coord")) cfg.scan.coord = static_cast<int>(Count(v["coord"], "scan.coord"));
      if (v.contains("lo")) cfg.scan.lo = Number(v["lo"], "scan.lo");
      if (v.contains("hi")) cfg.scan.hi = Number(v["hi"], "scan.hi");
      if (v.contains("points")) cfg.scan.points = static_cast<int>(Count(v["points"], "scan.points"));
    } else if (k == "influence") {
      CheckKeys(v, {"lo", "hi", "points"}, "influence");
      if (v.contains("lo")) cfg.influence.lo = Number(v["lo"], "influence.lo");
      if (v.contains("hi")) cfg.influence.hi = Number(v["hi"], "influence.hi");
      if (v.contains("points")) {
        cfg.influence.points = static_cast<int>(Count(v["points"], "influence.points"));
      }
    } else if (k == "clt") {
      CheckKeys(v, {"n_list"}, "clt");
      if (v.contains("n_list")) {
        const Vector ns = Numbers(v["n_list"], "clt.n_list");
        for (Index i = 0; i < ns.size(); ++i) cfg.clt_n.push_back(static_cast<Index>(ns(i)));
      }
    } else if (k == "replications") {
      cfg.replications = static_cast<int>(Count(v, k));
    } else if (k == "seed") {
      cfg.seed = static_cast<std::uint64_t>(Count(v, k));
    } else if (k == "ridge") {
      cfg.ridge = Number(v, k);
    } else if (k == "timing") {
      if (!v.is_boolean()) throw ConfigError("timing must be a boolean");
      cfg.timing = v.get<bool>();
    } else if (k == "output") {
      cfg.output = Text(v, k);
    }
  }
  if (cfg.sampler.empty()) cfg.sampler = cfg.model;
  if (!sampler_hyper_set) cfg.sampler_hyper = cfg.model_hyper;
  if (cfg.n < 1) throw ConfigError("n must be at least 1");
  if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
  if (cfg.corruption_count < 0 || (cfg.corruption_count > 0 && cfg.corruption_count >= cfg.n)) {
    throw ConfigError("corruption.count must be in [0, n)");
  }
  if (cfg.corruption_count > 0 && cfg.corruption_value.size() == 0) {
    throw ConfigError("corruption.value is required when corruption.count > 0");
  }
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return ParseExperimentConfig(j);
}

Json ExperimentConfigToJson(const ExperimentConfig& cfg) {
  Json j;
  j["model"] = cfg.model;
  j["model_hyper"] = Json(cfg.model_hyper);
  j["theta_star"] = VectorToJson(cfg.theta_star);
  j["sampler"] = cfg.sampler;
  j["sampler_hyper"] = Json(cfg.sampler_hyper);
  j["n"] = cfg.n;
  if (cfg.corruption_count > 0) {
    j["corruption"] = {{"count", cfg.corruption_count},
                       {"value", VectorToJson(cfg.corruption_value)}};
  } else {
    j["corruption"] = nullptr;
  }
  j["estimator"] = cfg.estimator;
  j["kernel"] = ComponentToJson(cfg.kernel);
  j["diffusion"] = ComponentToJson(cfg.diffusion);
  Json fit;
  fit["method"] = cfg.fit.method;
  fit["free"] = cfg.fit.free;
  fit["lo"] = cfg.fit.lo;
  fit["hi"] = cfg.fit.hi;
  fit["grid_points"] = cfg.fit.grid_points;
  fit["tol"] = cfg.fit.tol;
  if (cfg.fit.theta0) fit["theta0"] = VectorToJson(*cfg.fit.theta0);
  fit["step"] = cfg.fit.optim.step;
  fit["schedule"] = cfg.fit.optim.schedule == StepSchedule::kConstant ? "constant" : "one_over_t";
  fit["batch_size"] = cfg.fit.optim.batch_size;
  fit["max_iters"] = cfg.fit.optim.max_iters;
  switch (cfg.fit.optim.preconditioner) {
    case Preconditioner::kNone: fit["preconditioner"] = "none"; break;
    case Preconditioner::kInfo: fit["preconditioner"] = "info"; break;
    case Preconditioner::kIdentity: fit["preconditioner"] = "identity"; break;
  }
  fit["ridge"] = cfg.fit.optim.ridge;
  j["fit"] = fit;
  j["scan"] = {{"coord", cfg.scan.coord}, {"lo", cfg.scan.lo}, {"hi", cfg.scan.hi},
               {"points", cfg.scan.points}};
  j["influence"] = {{"lo", cfg.influence.lo}, {"hi", cfg.influence.hi},
                    {"points", cfg.influence.points}};
  j["clt"] = {{"n_list", cfg.clt_n}};
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["ridge"] = cfg.ridge;
  j["output"] = cfg.output;
  return j;
}

bool IsKernelEstimator(const std::string& estimator) {
  return estimator == "ksd" || estimator == "dksd" || estimator == "nnksd";
}

Estimator BuildEstimator(const ExperimentConfig& cfg) {
  Estimator e;
  e.kind = cfg.estimator;
  e.model = BuiltinModel(cfg.model, cfg.model_hyper);
  e.model->CheckTheta(cfg.theta_star);
  const int d = e.model->dim_x();
  const std::string& k = cfg.estimator;
  if (k == "sm" || k == "ksd") {
    e.m = BuiltinDiffusion("identity");
  } else if (k == "nnsm" || k == "nnksd") {
    e.m = BuiltinDiffusion("nonneg");
  } else if (k == "dsm" || k == "dksd") {
    e.m = BuiltinDiffusion(cfg.diffusion.id, cfg.diffusion.params);
  } else {
    throw ConfigError("unknown estimator '" + k + "'; expected sm, dsm, ksd, dksd, nnsm or nnksd");
  }
  if (e.m->fixed_dim() != 0 && e.m->fixed_dim() != d) {
    throw ConfigError("diffusion '" + e.m->name() + "' needs d = " +
                      std::to_string(e.m->fixed_dim()));
  }
  if (IsKernelEstimator(k)) {
    e.kernel = MatrixKernel::ScaledIdentity(d, BuiltinScalarKernel(cfg.kernel.id, cfg.kernel.params));
    e.objective = DksdObjective(e.model, *e.kernel, e.m);
  } else if (k == "sm") {
    e.objective = SmObjective(e.model);
  } else {
    e.objective = DsmObjective(e.model, e.m);
  }
  return e;
}

Sample DrawReplication(const ExperimentConfig& cfg, int rep) {
  const std::uint64_t stream = 2 * static_cast<std::uint64_t>(rep);
  Sample s = SampleFrom(cfg.sampler, cfg.theta_star, cfg.n, cfg.seed, cfg.sampler_hyper, stream);
  if (cfg.corruption_count > 0) {
    s = Corrupt(s, cfg.corruption_count, cfg.corruption_value, StreamSeed(cfg.seed, stream + 1));
  }
  return s;
}

FitOutcome FitSample(const ExperimentConfig& cfg, const Estimator& est,
                     const Sample& sample, int rep) {
  const int p = est.model->dim_theta();
  const std::vector<int> free = FreeCoords(cfg, p);
  FitOutcome out;
  if (cfg.fit.method == "grid") {
    if (free.size() != 1) throw ConfigError("grid fitting needs exactly one free coordinate");
    const Vector anchor = cfg.fit.theta0 ? *cfg.fit.theta0 : cfg.theta_star;
    if (anchor.size() != p) throw ConfigError("fit.theta0 has the wrong length");
    const ScalarFit f = FitCoordinate(*est.objective, sample, anchor, free[0], cfg.fit.lo,
                                      cfg.fit.hi, cfg.fit.grid_points, cfg.fit.tol);
    out.theta = anchor;
    out.theta(free[0]) = f.theta;
    out.loss = f.loss;
  } else if (cfg.fit.method == "sgd") {
    const Vector start = cfg.fit.theta0 ? *cfg.fit.theta0 : cfg.theta_star;
    if (start.size() != p) throw ConfigError("fit.theta0 has the wrong length");
    const ObjectivePtr sub = SubsetObjective(est.objective, start, free);
    OptimConfig o = cfg.fit.optim;
    o.seed = StreamSeed(StreamSeed(cfg.seed, 0x5eed), static_cast<std::uint64_t>(rep));
    o.timing = cfg.timing;
    const SgdResult r = SgdRun(*sub, sample, SubVector(start, free), o);
    if (r.trajectory.aborted) throw NumericalError(r.trajectory.message);
    out.theta = start;
    for (std::size_t k = 0; k < free.size(); ++k) out.theta(free[k]) = r.theta(k);
    out.loss = est.objective->Evaluate(out.theta, sample, kWantValue).value;
  } else if (cfg.fit.method == "closed_form") {
    if (static_cast<int>(free.size()) != p) {
      throw ConfigError("closed_form fitting estimates every coordinate");
    }
    const ExpFamPtr spec = BuiltinExpFam(cfg.model, cfg.model_hyper);
    QuadraticForm q = est.kernel ? DksdQuadratic(*spec, *est.kernel, *est.m, sample)
                                 : DsmQuadratic(*spec, *est.m, sample);
    out.theta = SolveQuadratic(q);
    out.loss = q.Eval(out.theta) * (est.kind == "sm" ? 0.5 : 1.0);
  } else {
    throw ConfigError("fit.method must be grid, sgd or closed_form");
  }
  return out;
}

Matrix SandwichAt(const ExperimentConfig& cfg, const Estimator& est,
                  const Vector& theta, const Sample& sample) {
  const std::vector<int> free = FreeCoords(cfg, est.model->dim_theta());
  if (est.kernel) {
    SteinKernelCtx ctx(est.model, *est.kernel, est.m, theta, sample);
    return SandwichCovarianceDksd(ctx, cfg.ridge, free);
  }
  return SandwichCovarianceDsm(*est.model, *est.m, theta, sample, cfg.ridge, free);
}

double Median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

RunResult RunExperiment(const ExperimentConfig& cfg) {
  const Estimator est = BuildEstimator(cfg);
  const int p = est.model->dim_theta();
  RunResult res;
  res.reps.resize(cfg.replications);
  ParallelFor(static_cast<std::size_t>(cfg.replications), [&](std::size_t r) {
    Replication& rep = res.reps[r];
    rep.rep = static_cast<int>(r);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Sample s = DrawReplication(cfg, rep.rep);
      const FitOutcome f = FitSample(cfg, est, s, rep.rep);
      rep.theta_hat = f.theta;
      rep.loss = f.loss;
      rep.ok = true;
    } catch (const NumericalError& e) {
      rep.ok = false;
      rep.error = e.what();
      rep.theta_hat = Vector::Constant(p, kNaN);
      rep.loss = kNaN;
    }
    if (cfg.timing) rep.millis = MillisSince(t0);
  });
  for (const Replication& r : res.reps) res.ok_count += r.ok ? 1 : 0;
  if (res.ok_count == 0) {
    throw NumericalError("every replication failed; first error: " + res.reps.front().error);
  }
  res.median.resize(p);
  res.mad.resize(p);
  for (int a = 0; a < p; ++a) {
    std::vector<double> v;
    for (const Replication& r : res.reps) {
      if (r.ok) v.push_back(r.theta_hat(a));
    }
    res.median(a) = Median(v);
    for (double& x : v) x = std::abs(x - res.median(a));
    res.mad(a) = Median(v);
  }
  try {
    res.sandwich = SandwichAt(cfg, est, res.median, DrawReplication(cfg, 0));
  } catch (const NumericalError& e) {
    res.sandwich_error = e.what();
  } catch (const ConfigError& e) {
    res.sandwich_error = e.what();
  }
  return res;
}

std::string RepsCsv(const RunResult& r) {
  std::ostringstream out;
  const Index p = r.median.size();
  out << "rep";
  for (Index a = 0; a < p; ++a) out << ",theta_hat_" << a;
  out << ",loss,millis\n";
  for (const Replication& rep : r.reps) {
    out << rep.rep;
    for (Index a = 0; a < p; ++a) out << ',' << FormatDouble(rep.theta_hat(a));
    out << ',' << FormatDouble(rep.loss) << ',' << FormatDouble(rep.millis) << '\n';
  }
  return out.str();
}

Json RunSummaryJson(const ExperimentConfig& cfg, const RunResult& r) {
  Json j;
  j["config"] = ExperimentConfigToJson(cfg);
  j["replications"] = static_cast<int>(r.reps.size());
  j["succeeded"] = r.ok_count;
  j["median_theta_hat"] = VectorToJson(r.median);
  j["mad_theta_hat"] = VectorToJson(r.mad);
  if (r.sandwich) {
    j["sandwich_at_median"] = MatrixToJson(*r.sandwich);
  } else {
    j["sandwich_at_median"] = nullptr;
    j["sandwich_error"] = r.sandwich_error;
  }
  Json failures = Json::array();
  for (const Replication& rep : r.reps) {
    if (!rep.ok) failures.push_back({{"rep", rep.rep}, {"error", rep.error}});
  }
  j["failures"] = failures;
  return j;
}

std::vector<GridRow> ScanExperiment(const ExperimentConfig& cfg) {
  const Estimator est = BuildEstimator(cfg);
  if (cfg.scan.coord < 0 || cfg.scan.coord >= est.model->dim_theta()) {
    throw ConfigError("scan.coord out of range");
  }
  const Sample s = DrawReplication(cfg, 0);
  std::vector<Vector> grid;
  for (double v : Linspace(cfg.scan.lo, cfg.scan.hi, cfg.scan.points)) {
    Vector t = cfg.theta_star;
    t(cfg.scan.coord) = v;
    grid.push_back(t);
  }
  return GridScan(*est.objective, s, grid);
}

std::vector<InfluenceRow> InfluenceExperiment(const ExperimentConfig& cfg, Vector* fitted) {
  const Estimator est = BuildEstimator(cfg);
  const Sample s = DrawReplication(cfg, 0);
  const FitOutcome f = FitSample(cfg, est, s, 0);
  if (fitted) *fitted = f.theta;
  const int d = est.model->dim_x();
  std::vector<Vector> zs;
  for (double v : Linspace(cfg.influence.lo, cfg.influence.hi, cfg.influence.points)) {
    Vector z = Vector::Zero(d);
    z(0) = v;
    zs.push_back(z);
  }
  InfluenceInputs in;
  in.ridge = cfg.ridge;
  in.free = FreeCoords(cfg, est.model->dim_theta());
  std::optional<SteinKernelCtx> ctx;
  if (est.kernel) {
    ctx.emplace(est.model, *est.kernel, est.m, f.theta, s);
    in.kind = InfluenceKind::kDksd;
    in.ctx = &*ctx;
  } else {
    in.kind = est.kind == "sm" ? InfluenceKind::kSm : InfluenceKind::kDsm;
    in.model = est.model;
    in.m = est.m;
    in.theta = f.theta;
    in.sample = &s;
  }
  return InfluenceCurve(in, zs);
}

double NormalProbabilityCorrelation(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 3) return kNaN;
  std::sort(values.begin(), values.end());
  const boost::math::normal_distribution<double> normal;
  Vector x(static_cast<Index>(n)), q(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x(i) = values[i];
    q(i) = boost::math::quantile(normal, (i + 1 - 0.375) / (n + 0.25));
  }
  x.array() -= x.mean();
  q.array() -= q.mean();
  const double denom = x.norm() * q.norm();
  return denom > 0.0 ? x.dot(q) / denom : kNaN;
}

CltResult CltStudy(const ExperimentConfig& cfg) {
  if (cfg.clt_n.empty()) throw ConfigError("clt.n_list is empty");
  const Estimator est = BuildEstimator(cfg);
  const std::vector<int> free = FreeCoords(cfg, est.model->dim_theta());
  const int q = static_cast<int>(free.size());
  CltResult out;
  for (Index n : cfg.clt_n) {
    ExperimentConfig c = cfg;
    c.n = n;
    const RunResult run = RunExperiment(c);
    out.failed += static_cast<int>(run.reps.size()) - run.ok_count;
    Matrix z(run.ok_count, q);
    Vector pooled = Vector::Zero(est.model->dim_theta());
    int row = 0;
    for (const Replication& r : run.reps) {
      if (!r.ok) continue;
      pooled += r.theta_hat;
      for (int a = 0; a < q; ++a) {
        z(row, a) = std::sqrt(static_cast<double>(n)) * (r.theta_hat(free[a]) - cfg.theta_star(free[a]));
      }
      ++row;
    }
    pooled /= static_cast<double>(run.ok_count);
    const Matrix centered = z.rowwise() - z.colwise().mean();
    const Matrix emp = centered.transpose() * centered / static_cast<double>(std::max(row - 1, 1));
    const Matrix sand = SandwichAt(c, est, pooled, DrawReplication(c, 0));
    for (int i = 0; i < q; ++i) {
      for (int k = 0; k < q; ++k) {
        out.entries.push_back({n, i, k, emp(i, k), sand(i, k), emp(i, k) / sand(i, k)});
      }
      std::vector<double> col(z.col(i).data(), z.col(i).data() + z.rows());
      out.normality.push_back({n, i, NormalProbabilityCorrelation(col)});
    }
  }
  return out;
}

std::string CltCsv(const CltResult& r) {
  std::ostringstream out;
  out << "n,i,j,empirical,sandwich,ratio\n";
  for (const CltEntry& e : r.entries) {
    out << e.n << ',' << e.i << ',' << e.j << ',' << FormatDouble(e.empirical) << ','
        << FormatDouble(e.sandwich) << ',' << FormatDouble(e.ratio) << '\n';
  }
  return out.str();
}

Json CltSummaryJson(const CltResult& r) {
  Json j;
  Json entries = Json::array();
  for (const CltEntry& e : r.entries) {
    entries.push_back({{"n", e.n}, {"i", e.i}, {"j", e.j}, {"empirical", e.empirical},
                       {"sandwich", e.sandwich}, {"ratio", e.ratio}});
  }
  Json normal = Json::array();
  for (const CltCoordinate& c : r.normality) {
    normal.push_back({{"n", c.n}, {"coord", c.coord}, {"ppcc", c.ppcc}});
  }
  j["entries"] = entries;
  j["normality"] = normal;
  j["failed_replications"] = r.failed;
  return j;
}

void WriteTextFile(const std::string& dir, const std::string& name, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace steinest
