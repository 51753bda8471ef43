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

#include <cmath>
#include <limits>
#include <sstream>

#include "steinest/experiment.h"
#include "steinest/expfam.h"
#include "steinest/sampling.h"
#include "steinest/stein_kernel.h"

namespace steinest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int Reps(const PresetOptions& opt, int fallback) {
  return opt.replications > 0 ? opt.replications : fallback;
}

ExperimentConfig Common(const PresetOptions& opt) {
  ExperimentConfig c;
  c.seed = opt.seed;
  c.timing = opt.timing;
  c.output = opt.out_dir;
  return c;
}

double ArgminTheta(const std::vector<GridRow>& rows, int coord) {
  const int k = GridArgmin(rows);
  return k < 0 ? kNaN : rows[k].theta(coord);
}

std::vector<double> AbsErrors(const RunResult& r, int coord, double truth) {
  std::vector<double> e;
  for (const Replication& rep : r.reps) {
    e.push_back(rep.ok ? std::abs(rep.theta_hat(coord) - truth) : kNaN);
  }
  return e;
}

double MedianFinite(const std::vector<double>& v) {
  std::vector<double> f;
  for (double x : v) {
    if (std::isfinite(x)) f.push_back(x);
  }
  return Median(f);
}

// Symmetric Bessel location scans: SM and Gaussian-kernel KSD over a grid
// of lengthscales, theta_2 held at the truth.
Json BesselLoc(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "symmetric_bessel";
  c.model_hyper = {{"s", 2.0}};
  c.sampler = c.model;
  c.sampler_hyper = c.model_hyper;
  c.theta_star = Vector::Zero(2);
  c.theta_star(1) = 1.0;
  c.n = 500;
  c.scan = {0, -2.0, 2.0, 81};

  Json summary;
  summary["preset"] = "bessel_loc";
  summary["n"] = c.n;
  summary["s"] = 2.0;
  summary["theta_star"] = {0.0, 1.0};
  Json argmin = Json::object();
  Json within = Json::object();

  c.estimator = "sm";
  const std::vector<GridRow> sm = ScanExperiment(c);
  WriteTextFile(opt.out_dir, "scan_sm.csv", GridCsv(sm));
  argmin["sm"] = ArgminTheta(sm, 0);

  c.estimator = "ksd";
  for (double ell : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    c.kernel = {"gaussian", {{"lengthscale", ell}}};
    const std::vector<GridRow> rows = ScanExperiment(c);
    const std::string tag = "ksd_ell" + FormatDouble(ell);
    WriteTextFile(opt.out_dir, "scan_" + tag + ".csv", GridCsv(rows));
    argmin[tag] = ArgminTheta(rows, 0);
  }
  for (auto it = argmin.begin(); it != argmin.end(); ++it) {
    const double v = it.value().is_number() ? it.value().get<double>() : kNaN;
    within[it.key()] = std::abs(v) <= 0.1;
  }
  summary["grid_argmin_theta_1"] = argmin;
  summary["within_0.1_of_truth"] = within;
  return summary;
}

// Student-t location with the scale held at the truth: SM, KSD, DKSD and
// the non-negative variants over replications.
Json StudentTLoc(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "student_t";
  c.model_hyper = {{"nu", 5.0}};
  c.sampler = c.model;
  c.sampler_hyper = c.model_hyper;
  c.theta_star = Vector(2);
  c.theta_star << 25.0, 10.0;
  c.n = 300;
  c.replications = Reps(opt, 50);
  c.fit.method = "grid";
  c.fit.free = {0};
  c.fit.lo = 5.0;
  c.fit.hi = 45.0;
  c.fit.grid_points = 41;
  c.fit.tol = 1e-3;
  const ComponentConfig imq{"imq", {{"c", 1.0}, {"beta", -0.5}, {"lengthscale", 1.0}}};

  Json summary;
  summary["preset"] = "studentt_loc";
  summary["n"] = c.n;
  summary["nu"] = 5.0;
  summary["theta_star"] = {25.0, 10.0};
  summary["replications"] = c.replications;
  Json median_err = Json::object();
  std::map<std::string, std::vector<double>> errors;
  for (const std::string est : {"sm", "ksd", "dksd", "nnsm", "nnksd"}) {
    c.estimator = est;
    c.kernel = imq;
    c.diffusion = {"student_loc", {}};
    const RunResult r = RunExperiment(c);
    WriteTextFile(opt.out_dir, "reps_" + est + ".csv", RepsCsv(r));
    errors[est] = AbsErrors(r, 0, 25.0);
    median_err[est] = MedianFinite(errors[est]);
  }
  summary["median_abs_error_theta_1"] = median_err;
  // Fraction of replications where SM (or KSD) misses by more than DKSD.
  for (const std::string other : {"sm", "ksd"}) {
    int worse = 0;
    for (std::size_t k = 0; k < errors["dksd"].size(); ++k) {
      if (errors[other][k] > errors["dksd"][k]) ++worse;
    }
    summary["fraction_" + other + "_worse_than_dksd"] =
        static_cast<double>(worse) / static_cast<double>(errors["dksd"].size());
  }
  summary["dksd_median_error_smallest"] =
      median_err["dksd"].get<double>() < median_err["sm"].get<double>() &&
      median_err["dksd"].get<double>() < median_err["ksd"].get<double>();
  return summary;
}

int FirstWithin(const Trajectory& t, double target) {
  for (const TrajectoryRow& r : t.rows) {
    if (std::isfinite(r.full_loss) && r.full_loss <= target) return r.iter;
  }
  return -1;
}

// Plain against information-preconditioned SGD on the KSD loss.
Json StudentTSgd(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "student_t";
  c.model_hyper = {{"nu", 5.0}};
  c.sampler = c.model;
  c.sampler_hyper = c.model_hyper;
  c.theta_star = Vector(2);
  c.theta_star << 25.0, 10.0;
  c.n = 1000;
  c.estimator = "ksd";
  c.kernel = {"imq", {{"c", 1.0}, {"beta", -0.5}, {"lengthscale", 1.0}}};
  c.scan = {0, 10.0, 40.0, 121};
  const double theta0 = 15.0;
  const double step = 0.1;

  const Estimator est = BuildEstimator(c);
  const Sample s = DrawReplication(c, 0);
  std::vector<Vector> grid;
  for (double v : Linspace(c.scan.lo, c.scan.hi, c.scan.points)) {
    Vector t = c.theta_star;
    t(0) = v;
    grid.push_back(t);
  }
  const std::vector<GridRow> scan = GridScan(*est.objective, s, grid);
  WriteTextFile(opt.out_dir, "scan_ksd.csv", GridCsv(scan));
  const int best = GridArgmin(scan);
  if (best < 0) throw NumericalError("KSD scan failed everywhere");
  const double lmin = scan[best].loss;

  Vector anchor = c.theta_star;
  anchor(0) = theta0;
  const ObjectivePtr sub = SubsetObjective(est.objective, anchor, {0});
  OptimConfig o;
  o.step = step;
  o.batch_size = 50;
  o.seed = StreamSeed(opt.seed, 0x56d);
  o.timing = opt.timing;

  o.preconditioner = Preconditioner::kInfo;
  o.max_iters = 100;
  o.full_loss_every = 5;
  const SgdResult rsgd = SgdRun(*sub, s, anchor.head(1), o);
  WriteTextFile(opt.out_dir, "trajectory_rsgd.csv", TrajectoryCsv(rsgd.trajectory));

  o.preconditioner = Preconditioner::kNone;
  o.max_iters = 1000;
  o.full_loss_every = 25;
  const SgdResult sgd = SgdRun(*sub, s, anchor.head(1), o);
  WriteTextFile(opt.out_dir, "trajectory_sgd.csv", TrajectoryCsv(sgd.trajectory));

  // "Within 5%" is loss <= min + 0.05 |min|; the grid maximum is only reported.
  double lmax = lmin;
  for (const GridRow& r : scan) {
    if (r.ok) lmax = std::max(lmax, r.loss);
  }
  const double band = 0.05 * std::abs(lmin);
  Json summary;
  summary["preset"] = "studentt_sgd";
  summary["n"] = c.n;
  summary["theta_star"] = {25.0, 10.0};
  summary["theta0_1"] = theta0;
  summary["step"] = step;
  summary["batch_size"] = 50;
  summary["grid_min_loss"] = lmin;
  summary["grid_argmin_theta_1"] = scan[best].theta(0);
  summary["grid_max_loss"] = lmax;
  summary["target_loss"] = lmin + band;
  summary["rsgd_final_theta_1"] = rsgd.theta(0);
  summary["sgd_final_theta_1"] = sgd.theta(0);
  summary["rsgd_first_iter_within_5pct"] = FirstWithin(rsgd.trajectory, lmin + band);
  summary["sgd_first_iter_within_5pct"] = FirstWithin(sgd.trajectory, lmin + band);
  summary["rsgd_aborted"] = rsgd.trajectory.aborted;
  summary["sgd_aborted"] = sgd.trajectory.aborted;
  return summary;
}

struct CurveStats {
  double max_inner = 0.0;  // over |z| <= 20
  double max_outer = 0.0;  // over the whole grid
  double r2 = 0.0;         // linear fit of the first component on z
};

CurveStats Stats(const std::vector<InfluenceRow>& rows) {
  CurveStats st;
  std::vector<double> zs, vs;
  for (const InfluenceRow& r : rows) {
    if (!r.ok) continue;
    const double z = r.z(0);
    if (std::abs(z) <= 20.0 + 1e-12) st.max_inner = std::max(st.max_inner, r.norm);
    st.max_outer = std::max(st.max_outer, r.norm);
    zs.push_back(z);
    vs.push_back(r.value(0));
  }
  const Index n = static_cast<Index>(zs.size());
  if (n > 2) {
    const Eigen::Map<const Vector> z(zs.data(), n), v(vs.data(), n);
    const Vector zc = z.array() - z.mean();
    const Vector vc = v.array() - v.mean();
    const double denom = zc.squaredNorm() * vc.squaredNorm();
    st.r2 = denom > 0.0 ? std::pow(zc.dot(vc), 2) / denom : kNaN;
  }
  return st;
}

// Generalized gamma location with 80 of 300 points moved to x = 8, plus
// influence curves on clean data.
Json GenGammaRobust(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "generalized_gamma";
  c.sampler = c.model;
  c.theta_star = Vector(2);
  c.theta_star << 0.0, 2.0;
  c.n = 300;
  c.corruption_count = 80;
  c.corruption_value = Vector::Constant(1, 8.0);
  c.replications = Reps(opt, 50);
  c.fit.method = "grid";
  c.fit.free = {0};
  c.fit.lo = -3.0;
  c.fit.hi = 9.0;
  c.fit.grid_points = 100;
  c.fit.tol = 1e-3;
  c.diffusion = {"decay", {{"alpha", 2.0}}};
  c.kernel = {"gaussian", {{"lengthscale", 1.0}}};

  Json summary;
  summary["preset"] = "gengamma_robust";
  summary["n"] = c.n;
  summary["theta_star"] = {0.0, 2.0};
  summary["corrupted"] = c.corruption_count;
  summary["corruption_value"] = 8.0;
  summary["replications"] = c.replications;

  std::map<std::string, std::vector<double>> theta1;
  for (const std::string est : {"sm", "dsm"}) {
    c.estimator = est;
    const RunResult r = RunExperiment(c);
    WriteTextFile(opt.out_dir, "reps_" + est + ".csv", RepsCsv(r));
    for (const Replication& rep : r.reps) theta1[est].push_back(rep.ok ? rep.theta_hat(0) : kNaN);
  }
  std::vector<double> dsm_abs;
  for (double v : theta1["dsm"]) dsm_abs.push_back(std::abs(v));
  int dsm_ok = 0, sm_biased = 0;
  for (double v : theta1["dsm"]) dsm_ok += std::abs(v) < 0.5 ? 1 : 0;
  for (double v : theta1["sm"]) sm_biased += v > 1.0 ? 1 : 0;
  const double reps = static_cast<double>(c.replications);
  summary["median_abs_theta_1_dsm"] = MedianFinite(dsm_abs);
  summary["median_theta_1_sm"] = MedianFinite(theta1["sm"]);
  summary["fraction_dsm_within_0.5"] = dsm_ok / reps;
  summary["fraction_sm_above_1"] = sm_biased / reps;

  // Influence curves on uncorrupted data.
  ExperimentConfig clean = c;
  clean.corruption_count = 0;
  clean.influence = {-30.0, 30.0, 241};
  Json curves = Json::object();
  for (const std::string est : {"sm", "dsm", "dksd"}) {
    clean.estimator = est;
    if (est == "dksd") clean.diffusion = {"identity", {}};
    Vector fitted;
    const std::vector<InfluenceRow> rows = InfluenceExperiment(clean, &fitted);
    WriteTextFile(opt.out_dir, "influence_" + est + ".csv", InfluenceCsv(rows));
    const CurveStats st = Stats(rows);
    curves[est] = {{"fitted_theta_1", fitted(0)},
                   {"max_norm_within_20", st.max_inner},
                   {"max_norm_within_30", st.max_outer},
                   {"relative_change_20_to_30",
                    st.max_inner > 0.0 ? (st.max_outer - st.max_inner) / st.max_inner : kNaN},
                   {"linear_r2", st.r2}};
  }
  summary["influence"] = curves;
  return summary;
}

// Six-dimensional exponential family: closed form against full-batch
// Riemannian SGD, with m = diag(1 / (1 + x_i)).
Json Intractable(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "intractable_expfam";
  c.sampler = c.model;
  c.theta_star = Vector::Constant(1, -1.0);
  c.n = 200;
  c.replications = Reps(opt, 20);
  c.estimator = "dksd";
  c.diffusion = {"recip_diag", {}};
  c.kernel = {"gaussian", {{"lengthscale", 1.0}}};
  const Estimator est = BuildEstimator(c);
  const ExpFamPtr spec = BuiltinExpFam(c.model);

  ExperimentConfig plain = c;
  plain.diffusion = {"identity", {}};
  const Estimator ksd = BuildEstimator(plain);

  struct Row {
    bool ok = false;
    double closed = kNaN;
    double sgd = kNaN;
    double ksd = kNaN;
    std::string error;
  };
  std::vector<Row> rows(c.replications);
  ParallelFor(rows.size(), [&](std::size_t r) {
    try {
      const Sample s = DrawReplication(c, static_cast<int>(r));
      try {
        rows[r].ksd = SolveQuadratic(DksdQuadratic(*spec, *ksd.kernel, *ksd.m, s))(0);
      } catch (const NumericalError&) {
      }
      const QuadraticForm q = DksdQuadratic(*spec, *est.kernel, *est.m, s);
      rows[r].closed = SolveQuadratic(q)(0);
      OptimConfig o;
      o.batch_size = 0;
      o.step = 0.5;
      o.max_iters = 60;
      o.preconditioner = Preconditioner::kInfo;
      o.seed = StreamSeed(opt.seed, r);
      const SgdResult res = SgdRun(*est.objective, s, Vector::Zero(1), o);
      if (res.trajectory.aborted) throw NumericalError(res.trajectory.message);
      rows[r].sgd = res.theta(0);
      rows[r].ok = true;
    } catch (const NumericalError& e) {
      rows[r].error = e.what();
    }
  });
  std::ostringstream csv;
  csv << "rep,theta_closed_form,theta_sgd,abs_diff,theta_ksd\n";
  std::vector<double> closed, plain_ksd;
  double max_diff = 0.0;
  int ok = 0;
  Json failures = Json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double diff = std::abs(rows[r].closed - rows[r].sgd);
    csv << r << ',' << FormatDouble(rows[r].closed) << ',' << FormatDouble(rows[r].sgd) << ','
        << FormatDouble(rows[r].ok ? diff : kNaN) << ',' << FormatDouble(rows[r].ksd) << '\n';
    if (std::isfinite(rows[r].ksd)) plain_ksd.push_back(rows[r].ksd);
    if (rows[r].ok) {
      ++ok;
      closed.push_back(rows[r].closed);
      max_diff = std::max(max_diff, diff);
    } else {
      failures.push_back({{"rep", r}, {"error", rows[r].error}});
    }
  }
  WriteTextFile(opt.out_dir, "reps.csv", csv.str());
  Json summary;
  summary["preset"] = "intractable";
  summary["n"] = c.n;
  summary["theta_star"] = -1.0;
  summary["replications"] = c.replications;
  summary["succeeded"] = ok;
  summary["median_theta_closed_form"] = Median(closed);
  summary["median_theta_ksd"] = Median(plain_ksd);
  summary["max_abs_diff_closed_vs_sgd"] = ok > 0 ? max_diff : kNaN;
  summary["failures"] = failures;
  return summary;
}

// Gaussian location, DSM with m = I: replication covariance against the
// plug-in sandwich.
Json CltGaussian(const PresetOptions& opt) {
  ExperimentConfig c = Common(opt);
  c.model = "gaussian_location";
  c.sampler = c.model;
  c.theta_star = Vector::Zero(1);
  c.n = 1000;
  c.clt_n = {1000, 4000};
  c.replications = Reps(opt, 200);
  c.estimator = "dsm";
  c.diffusion = {"identity", {}};
  c.fit.method = "closed_form";
  const CltResult r = CltStudy(c);
  WriteTextFile(opt.out_dir, "clt.csv", CltCsv(r));
  Json summary = CltSummaryJson(r);
  summary["preset"] = "clt_gaussian";
  summary["replications"] = c.replications;
  return summary;
}

}  // namespace

std::vector<std::string> PresetIds() {
  return {"bessel_loc", "studentt_loc", "studentt_sgd", "gengamma_robust", "intractable",
          "clt_gaussian"};
}

Json RunPreset(const std::string& name, const PresetOptions& opt) {
  Json summary;
  if (name == "bessel_loc") {
    summary = BesselLoc(opt);
  } else if (name == "studentt_loc") {
    summary = StudentTLoc(opt);
  } else if (name == "studentt_sgd") {
    summary = StudentTSgd(opt);
  } else if (name == "gengamma_robust") {
    summary = GenGammaRobust(opt);
  } else if (name == "intractable") {
    summary = Intractable(opt);
  } else if (name == "clt_gaussian") {
    summary = CltGaussian(opt);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  summary["seed"] = opt.seed;
  WriteTextFile(opt.out_dir, "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace steinest
