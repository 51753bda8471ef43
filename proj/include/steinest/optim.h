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

#ifndef STEINEST_OPTIM_H_
#define STEINEST_OPTIM_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "steinest/common.h"
#include "steinest/diffusion.h"
#include "steinest/estimators.h"
#include "steinest/kernel.h"
#include "steinest/model.h"

namespace steinest {

// A loss over theta evaluated on an arbitrary batch of rows.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim_theta() const = 0;
  virtual std::vector<ParamDomain> theta_domain() const {
    return std::vector<ParamDomain>(dim_theta());
  }
  // Smallest batch the loss is defined on.
  virtual Index min_batch() const { return 1; }
  virtual LossReport Evaluate(const Vector& theta, const Sample& batch,
                              unsigned wants) const = 0;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// DKSD U-statistic.
ObjectivePtr DksdObjective(ModelPtr model, MatrixKernel kernel, DiffusionPtr m);
// `scale` times the DSM loss; scale 1/2 with m = I gives score matching.
ObjectivePtr DsmObjective(ModelPtr model, DiffusionPtr m, double scale = 1.0);
ObjectivePtr SmObjective(ModelPtr model);

// Restriction of `base` to the coordinates `free`, the others held at
// `anchor`.
ObjectivePtr SubsetObjective(ObjectivePtr base, Vector anchor, std::vector<int> free);

// Loss, gradient and metric supplied as closures. The batch is ignored.
struct FunctionObjectiveFns {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
  std::function<Matrix(const Vector&)> info;  // optional
};
ObjectivePtr FunctionObjective(int dim_theta, FunctionObjectiveFns fns,
                               std::vector<ParamDomain> domain = {});

enum class StepSchedule { kConstant, kOneOverT };
enum class Preconditioner { kNone, kInfo, kIdentity };

struct OptimConfig {
  StepSchedule schedule = StepSchedule::kConstant;
  double step = 0.1;          // gamma, or gamma_0 for the 1/t schedule
  Index batch_size = 50;      // rows per step; values >= n use the full sample
  int max_iters = 100;
  std::uint64_t seed = 0;
  Preconditioner preconditioner = Preconditioner::kNone;
  double ridge = kDefaultRidge;
  // Per-coordinate log-space flag; empty means log-space exactly for the
  // coordinates whose domain is (0, inf).
  std::vector<bool> log_space;
  double tol = 0.0;           // stop once ||theta_{t+1} - theta_t|| < tol
  int full_loss_every = 0;    // > 0 records the full-sample loss every k steps
  bool timing = false;        // wall time column is 0 unless set
};

struct TrajectoryRow {
  int iter = 0;
  Vector theta;               // before the update
  double loss = 0.0;          // minibatch loss at theta
  double grad_norm = 0.0;     // minibatch gradient norm in theta coordinates
  double full_loss = 0.0;     // NaN when not recorded
  double millis = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  bool aborted = false;
  std::string message;
};

struct SgdResult {
  Vector theta;
  Trajectory trajectory;
};

// Minibatch (Riemannian) SGD. Throws ConfigError for bad settings; a
// non-finite loss or gradient ends the run with `aborted` set.
SgdResult SgdRun(const Objective& objective, const Sample& sample,
                 const Vector& theta0, const OptimConfig& cfg);

// CSV with columns iter, theta_0.., loss, grad_norm, full_loss, millis.
std::string TrajectoryCsv(const Trajectory& t);

struct GridRow {
  Vector theta;
  double loss = 0.0;  // NaN on failure
  bool ok = false;
};

// Full-sample loss at every grid point, rows in grid order.
std::vector<GridRow> GridScan(const Objective& objective, const Sample& sample,
                              const std::vector<Vector>& grid);
// theta_0.. and loss columns, failures written as "nan".
std::string GridCsv(const std::vector<GridRow>& rows);

// Index of the smallest finite loss, -1 if none.
int GridArgmin(const std::vector<GridRow>& rows);

// Evenly spaced values on [lo, hi].
std::vector<double> Linspace(double lo, double hi, int count);

// Golden-section minimization of a unimodal f on [lo, hi].
double GoldenSectionMin(const std::function<double(double)>& f, double lo,
                        double hi, double tol);

// One-coordinate fit: coarse grid over [lo, hi] then golden-section
// refinement between the neighbours of the best grid point.
struct ScalarFit {
  double theta = 0.0;
  double loss = 0.0;
};
ScalarFit FitCoordinate(const Objective& objective, const Sample& sample,
                        const Vector& anchor, int coord, double lo, double hi,
                        int grid_points, double tol);

}  // namespace steinest

#endif  // STEINEST_OPTIM_H_
