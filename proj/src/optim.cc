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

#include "steinest/optim.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "steinest/stein_kernel.h"

namespace steinest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Dksd : public Objective {
 public:
  Dksd(ModelPtr model, MatrixKernel kernel, DiffusionPtr m)
      : model_(std::move(model)), kernel_(std::move(kernel)), m_(std::move(m)) {
    if (!model_ || !m_) throw ConfigError("DKSD objective needs a model and a diffusion");
  }
  int dim_theta() const override { return model_->dim_theta(); }
  std::vector<ParamDomain> theta_domain() const override { return model_->theta_domain(); }
  Index min_batch() const override { return 2; }
  LossReport Evaluate(const Vector& theta, const Sample& batch,
                      unsigned wants) const override {
    const bool derivs = (wants & (kWantGrad | kWantInfo)) != 0;
    SteinKernelCtx ctx(model_, kernel_, m_, theta, batch, derivs);
    return DksdEvaluate(ctx, wants);
  }

 private:
  ModelPtr model_;
  MatrixKernel kernel_;
  DiffusionPtr m_;
};

class Dsm : public Objective {
 public:
  Dsm(ModelPtr model, DiffusionPtr m, double scale)
      : model_(std::move(model)), m_(std::move(m)), scale_(scale) {
    if (!model_ || !m_) throw ConfigError("DSM objective needs a model and a diffusion");
    if (m_->depends_on_theta()) {
      throw ConfigError("DSM needs a diffusion that does not depend on theta; '" +
                        m_->name() + "' does");
    }
    if (!(scale_ > 0.0)) throw ConfigError("DSM objective scale must be positive");
  }
  int dim_theta() const override { return model_->dim_theta(); }
  std::vector<ParamDomain> theta_domain() const override { return model_->theta_domain(); }
  LossReport Evaluate(const Vector& theta, const Sample& batch,
                      unsigned wants) const override {
    LossReport r = DsmEvaluate(*model_, *m_, theta, batch, wants);
    if (scale_ != 1.0) {
      r.value *= scale_;
      if (r.grad) *r.grad *= scale_;
      if (r.info) *r.info *= scale_;
    }
    return r;
  }

 private:
  ModelPtr model_;
  DiffusionPtr m_;
  double scale_;
};

class Subset : public Objective {
 public:
  Subset(ObjectivePtr base, Vector anchor, std::vector<int> free)
      : base_(std::move(base)), anchor_(std::move(anchor)), free_(std::move(free)) {
    if (!base_) throw ConfigError("subset objective needs a base objective");
    if (anchor_.size() != base_->dim_theta()) {
      throw ConfigError("anchor length does not match the objective");
    }
    if (free_.empty()) throw ConfigError("subset objective needs at least one free coordinate");
    for (int c : free_) {
      if (c < 0 || c >= base_->dim_theta()) throw ConfigError("free coordinate out of range");
    }
  }
  int dim_theta() const override { return static_cast<int>(free_.size()); }
  std::vector<ParamDomain> theta_domain() const override {
    const std::vector<ParamDomain> all = base_->theta_domain();
    std::vector<ParamDomain> out;
    for (int c : free_) out.push_back(all[c]);
    return out;
  }
  Index min_batch() const override { return base_->min_batch(); }
  LossReport Evaluate(const Vector& theta, const Sample& batch,
                      unsigned wants) const override {
    Vector full = anchor_;
    for (std::size_t k = 0; k < free_.size(); ++k) full(free_[k]) = theta(k);
    LossReport r = base_->Evaluate(full, batch, wants);
    if (r.grad) r.grad = SubVector(*r.grad, free_);
    if (r.info) r.info = SubMatrix(*r.info, free_);
    return r;
  }

 private:
  ObjectivePtr base_;
  Vector anchor_;
  std::vector<int> free_;
};

class Functional : public Objective {
 public:
  Functional(int p, FunctionObjectiveFns fns, std::vector<ParamDomain> domain)
      : p_(p), fns_(std::move(fns)), domain_(std::move(domain)) {
    if (p_ < 1) throw ConfigError("objective needs at least one parameter");
    if (!fns_.value || !fns_.grad) throw ConfigError("objective needs value and gradient");
    if (domain_.empty()) domain_.resize(p_);
  }
  int dim_theta() const override { return p_; }
  std::vector<ParamDomain> theta_domain() const override { return domain_; }
  LossReport Evaluate(const Vector& theta, const Sample& batch,
                      unsigned wants) const override {
    LossReport r;
    r.n_used = batch.size();
    if (wants & kWantValue) r.value = fns_.value(theta);
    if (wants & kWantGrad) r.grad = fns_.grad(theta);
    if (wants & kWantInfo) {
      if (!fns_.info) throw ConfigError("objective has no information matrix");
      r.info = fns_.info(theta);
    }
    return r;
  }

 private:
  int p_;
  FunctionObjectiveFns fns_;
  std::vector<ParamDomain> domain_;
};

std::vector<bool> LogFlags(const Objective& obj, const OptimConfig& cfg) {
  const std::vector<ParamDomain> dom = obj.theta_domain();
  if (!cfg.log_space.empty()) {
    if (static_cast<int>(cfg.log_space.size()) != obj.dim_theta()) {
      throw ConfigError("log_space flags do not match the parameter count");
    }
    for (int a = 0; a < obj.dim_theta(); ++a) {
      if (cfg.log_space[a] && dom[a].lo < 0.0) {
        throw ConfigError("log-space coordinate " + std::to_string(a) +
                          " has a domain reaching below zero");
      }
    }
    return cfg.log_space;
  }
  std::vector<bool> flags(dom.size());
  for (std::size_t a = 0; a < dom.size(); ++a) flags[a] = dom[a].IsPositiveHalfLine();
  return flags;
}

Vector ToTheta(const Vector& phi, const std::vector<bool>& log_space) {
  Vector theta = phi;
  for (Index a = 0; a < phi.size(); ++a) {
    if (log_space[a]) theta(a) = std::exp(phi(a));
  }
  return theta;
}

// Partial Fisher-Yates over `perm`; returns the first k entries sorted.
std::vector<Index> DrawBatch(std::vector<Index>* perm, Index k, Rng* rng) {
  const Index n = static_cast<Index>(perm->size());
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap((*perm)[i], (*perm)[pick(*rng)]);
  }
  std::vector<Index> rows(perm->begin(), perm->begin() + k);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

ObjectivePtr DksdObjective(ModelPtr model, MatrixKernel kernel, DiffusionPtr m) {
  return std::make_shared<Dksd>(std::move(model), std::move(kernel), std::move(m));
}

ObjectivePtr DsmObjective(ModelPtr model, DiffusionPtr m, double scale) {
  return std::make_shared<Dsm>(std::move(model), std::move(m), scale);
}

ObjectivePtr SmObjective(ModelPtr model) {
  return DsmObjective(std::move(model), BuiltinDiffusion("identity"), 0.5);
}

ObjectivePtr SubsetObjective(ObjectivePtr base, Vector anchor, std::vector<int> free) {
  return std::make_shared<Subset>(std::move(base), std::move(anchor), std::move(free));
}

ObjectivePtr FunctionObjective(int dim_theta, FunctionObjectiveFns fns,
                               std::vector<ParamDomain> domain) {
  return std::make_shared<Functional>(dim_theta, std::move(fns), std::move(domain));
}

SgdResult SgdRun(const Objective& objective, const Sample& sample,
                 const Vector& theta0, const OptimConfig& cfg) {
  const int p = objective.dim_theta();
  if (theta0.size() != p) throw ConfigError("initial theta has the wrong length");
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) throw ConfigError("step size must be positive");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (!(cfg.ridge >= 0.0)) throw ConfigError("ridge must be non-negative");
  const Index n = sample.size();
  const Index batch = std::min(cfg.batch_size <= 0 ? n : cfg.batch_size, n);
  if (batch < objective.min_batch()) {
    throw ConfigError("minibatch size " + std::to_string(batch) + " is below the minimum of " +
                      std::to_string(objective.min_batch()) + " for this loss");
  }
  const std::vector<ParamDomain> dom = objective.theta_domain();
  for (int a = 0; a < p; ++a) {
    if (!std::isfinite(theta0(a)) || !dom[a].Contains(theta0(a))) {
      throw ConfigError("initial theta_" + std::to_string(a) + " lies outside the domain");
    }
  }
  const std::vector<bool> log_space = LogFlags(objective, cfg);
  Vector phi = theta0;
  for (int a = 0; a < p; ++a) {
    if (log_space[a]) phi(a) = std::log(theta0(a));
  }

  unsigned wants = kWantValue | kWantGrad;
  if (cfg.preconditioner == Preconditioner::kInfo) wants |= kWantInfo;

  Rng rng(StreamSeed(cfg.seed, 0));
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  const auto start = std::chrono::steady_clock::now();

  SgdResult result;
  Vector theta = theta0;
  for (int t = 0; t < cfg.max_iters; ++t) {
    TrajectoryRow row;
    row.iter = t;
    row.theta = theta;
    row.full_loss = kNaN;
    try {
      Sample sub;
      const Sample* used = &sample;
      if (batch < n) {
        sub = sample.Subset(DrawBatch(&perm, batch, &rng));
        used = &sub;
      }
      const LossReport r = objective.Evaluate(theta, *used, wants);
      row.loss = r.value;
      if (!std::isfinite(r.value) || !r.grad || !r.grad->allFinite()) {
        throw NumericalError("non-finite loss or gradient at iteration " + std::to_string(t));
      }
      row.grad_norm = r.grad->norm();
      if (cfg.full_loss_every > 0 && t % cfg.full_loss_every == 0) {
        row.full_loss = objective.Evaluate(theta, sample, kWantValue).value;
      }
      // Chain rule into the optimization coordinates.
      Vector jac = Vector::Ones(p);
      for (int a = 0; a < p; ++a) {
        if (log_space[a]) jac(a) = theta(a);
      }
      const Vector g = r.grad->cwiseProduct(jac);
      Vector dir;
      switch (cfg.preconditioner) {
        case Preconditioner::kNone:
          dir = g;
          break;
        case Preconditioner::kIdentity:
          dir = Matrix::Identity(p, p).llt().solve(g);
          break;
        case Preconditioner::kInfo: {
          const Matrix metric = jac.asDiagonal() * (*r.info) * jac.asDiagonal();
          dir = RegularizedSolve(metric, g, cfg.ridge);
          break;
        }
      }
      const double gamma =
          cfg.schedule == StepSchedule::kConstant ? cfg.step : cfg.step / (t + 1.0);
      const Vector next_phi = phi - gamma * dir;
      const Vector next = ToTheta(next_phi, log_space);
      if (!next.allFinite()) {
        throw NumericalError("update left the finite range at iteration " + std::to_string(t));
      }
      for (int a = 0; a < p; ++a) {
        if (!dom[a].Contains(next(a))) {
          throw NumericalError("update left the domain in coordinate " + std::to_string(a) +
                               "; use log-space for positive parameters");
        }
      }
      if (cfg.timing) {
        row.millis = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start).count();
      }
      result.trajectory.rows.push_back(row);
      const double moved = (next - theta).norm();
      phi = next_phi;
      theta = next;
      if (cfg.tol > 0.0 && moved < cfg.tol) break;
    } catch (const NumericalError& e) {
      result.trajectory.rows.push_back(row);
      result.trajectory.aborted = true;
      result.trajectory.message = e.what();
      break;
    }
  }
  result.theta = theta;
  return result;
}

std::string TrajectoryCsv(const Trajectory& t) {
  std::ostringstream out;
  const Index p = t.rows.empty() ? 0 : t.rows.front().theta.size();
  out << "iter";
  for (Index a = 0; a < p; ++a) out << ",theta_" << a;
  out << ",loss,grad_norm,full_loss,millis\n";
  for (const TrajectoryRow& r : t.rows) {
    out << r.iter;
    for (Index a = 0; a < p; ++a) out << ',' << FormatDouble(r.theta(a));
    out << ',' << FormatDouble(r.loss) << ',' << FormatDouble(r.grad_norm) << ','
        << FormatDouble(r.full_loss) << ',' << FormatDouble(r.millis) << '\n';
  }
  return out.str();
}

std::vector<GridRow> GridScan(const Objective& objective, const Sample& sample,
                              const std::vector<Vector>& grid) {
  std::vector<GridRow> rows(grid.size());
  ParallelFor(grid.size(), [&](std::size_t k) {
    GridRow& row = rows[k];
    row.theta = grid[k];
    try {
      if (grid[k].size() != objective.dim_theta()) {
        throw ConfigError("grid point has the wrong length");
      }
      row.loss = objective.Evaluate(grid[k], sample, kWantValue).value;
      row.ok = std::isfinite(row.loss);
      if (!row.ok) row.loss = kNaN;
    } catch (const ConfigError&) {
      row.loss = kNaN;
    } catch (const NumericalError&) {
      row.loss = kNaN;
    }
  });
  return rows;
}

std::string GridCsv(const std::vector<GridRow>& rows) {
  std::ostringstream out;
  const Index p = rows.empty() ? 0 : rows.front().theta.size();
  for (Index a = 0; a < p; ++a) out << "theta_" << a << ',';
  out << "loss\n";
  for (const GridRow& r : rows) {
    for (Index a = 0; a < p; ++a) out << FormatDouble(r.theta(a)) << ',';
    out << FormatDouble(r.loss) << '\n';
  }
  return out.str();
}

int GridArgmin(const std::vector<GridRow>& rows) {
  int best = -1;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].ok) continue;
    if (best < 0 || rows[k].loss < rows[best].loss) best = static_cast<int>(k);
  }
  return best;
}

std::vector<double> Linspace(double lo, double hi, int count) {
  if (count < 1) throw ConfigError("grid needs at least one point");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double h = (hi - lo) / (count - 1);
  for (int k = 0; k < count; ++k) out[k] = lo + h * k;
  out.back() = hi;
  return out;
}

double GoldenSectionMin(const std::function<double(double)>& f, double lo,
                        double hi, double tol) {
  if (!(hi > lo)) return lo;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

ScalarFit FitCoordinate(const Objective& objective, const Sample& sample,
                        const Vector& anchor, int coord, double lo, double hi,
                        int grid_points, double tol) {
  if (coord < 0 || coord >= objective.dim_theta()) throw ConfigError("coordinate out of range");
  if (!(hi > lo)) throw ConfigError("fit interval is empty");
  const std::vector<double> xs = Linspace(lo, hi, std::max(grid_points, 3));
  std::vector<Vector> grid;
  for (double x : xs) {
    Vector t = anchor;
    t(coord) = x;
    grid.push_back(t);
  }
  const std::vector<GridRow> rows = GridScan(objective, sample, grid);
  const int best = GridArgmin(rows);
  if (best < 0) throw NumericalError("loss failed at every grid point");
  const auto loss_at = [&](double x) {
    Vector t = anchor;
    t(coord) = x;
    try {
      const double v = objective.Evaluate(t, sample, kWantValue).value;
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const ConfigError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const double a = xs[std::max(best - 1, 0)];
  const double b = xs[std::min<std::size_t>(best + 1, xs.size() - 1)];
  ScalarFit fit{xs[best], rows[best].loss};
  if (tol > 0.0) {
    const double x = GoldenSectionMin(loss_at, a, b, tol);
    const double v = loss_at(x);
    if (v < fit.loss) fit = {x, v};
  }
  return fit;
}

}  // namespace steinest
