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

#include "steinest/robust.h"

#include <limits>
#include <sstream>

namespace steinest {
namespace {

std::vector<int> FreeOrAll(const std::vector<int>& free, int p) {
  return free.empty() ? AllCoordinates(p) : free;
}

// Cholesky of the ridge-regularized metric, reused across grid points.
class MetricSolver {
 public:
  MetricSolver(const Matrix& g, double ridge) {
    // RegularizedSolve validates and reports the failure with the eigenvalue.
    RegularizedSolve(g, Vector::Zero(g.rows()), ridge);
    Matrix reg = Symmetrize(g);
    reg.diagonal().array() += ridge * reg.trace() / static_cast<double>(reg.rows());
    llt_.compute(reg);
  }
  Vector Solve(const Vector& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<Matrix> llt_;
};

}  // namespace

Vector InfluenceDksd(const SteinKernelCtx& ctx, const PointRef& z, double ridge,
                     const std::vector<int>& free) {
  const std::vector<int> idx = FreeOrAll(free, ctx.dim_theta());
  const Matrix g = SubMatrix(DksdInfoMatrix(ctx), idx);
  const Vector b = SubVector(DksdPointMeanGrad(ctx, z), idx);
  return -RegularizedSolve(g, b, ridge).col(0);
}

Vector InfluenceDsm(const Model& model, const Diffusion& m, const Vector& theta,
                    const Sample& sample, const PointRef& z, double ridge,
                    const std::vector<int>& free) {
  const std::vector<int> idx = FreeOrAll(free, model.dim_theta());
  const Matrix g = SubMatrix(DsmInfoMatrix(model, m, theta, sample), idx);
  const Vector b = SubVector(DsmPoint(model, m, theta, z, kWantGrad).grad, idx);
  return -RegularizedSolve(2.0 * g, b, ridge).col(0);
}

std::vector<InfluenceRow> InfluenceCurve(const InfluenceInputs& in,
                                         const std::vector<Vector>& zs) {
  Matrix g;
  std::vector<int> idx;
  DiffusionPtr m = in.m;
  if (in.kind == InfluenceKind::kDksd) {
    if (!in.ctx) throw ConfigError("DKSD influence needs a Stein kernel context");
    idx = FreeOrAll(in.free, in.ctx->dim_theta());
    g = SubMatrix(DksdInfoMatrix(*in.ctx), idx);
  } else {
    if (!in.model || !in.sample) throw ConfigError("DSM influence needs a model and a sample");
    if (in.kind == InfluenceKind::kSm) m = BuiltinDiffusion("identity");
    if (!m) throw ConfigError("DSM influence needs a diffusion");
    in.model->CheckTheta(in.theta);
    idx = FreeOrAll(in.free, in.model->dim_theta());
    g = 2.0 * SubMatrix(DsmInfoMatrix(*in.model, *m, in.theta, *in.sample), idx);
  }
  const MetricSolver solver(g, in.ridge);
  const Index q = static_cast<Index>(idx.size());
  std::vector<InfluenceRow> rows(zs.size());
  ParallelFor(zs.size(), [&](std::size_t k) {
    InfluenceRow& row = rows[k];
    row.z = zs[k];
    try {
      Vector b;
      if (in.kind == InfluenceKind::kDksd) {
        b = SubVector(DksdPointMeanGrad(*in.ctx, zs[k]), idx);
      } else {
        b = SubVector(DsmPoint(*in.model, *m, in.theta, zs[k], kWantGrad).grad, idx);
      }
      row.value = -solver.Solve(b);
      row.ok = row.value.allFinite();
    } catch (const ConfigError&) {
      row.ok = false;
    } catch (const NumericalError&) {
      row.ok = false;
    }
    if (!row.ok) {
      row.value = Vector::Constant(q, std::numeric_limits<double>::quiet_NaN());
      row.norm = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.norm = row.value.norm();
    }
  });
  return rows;
}

std::string InfluenceCsv(const std::vector<InfluenceRow>& rows) {
  std::ostringstream out;
  const Index d = rows.empty() ? 0 : rows.front().z.size();
  const Index q = rows.empty() ? 0 : rows.front().value.size();
  for (Index i = 0; i < d; ++i) out << "z_" << i << ',';
  for (Index a = 0; a < q; ++a) out << "if_" << a << ',';
  out << "if_norm\n";
  for (const InfluenceRow& r : rows) {
    for (Index i = 0; i < d; ++i) out << FormatDouble(r.z(i)) << ',';
    for (Index a = 0; a < q; ++a) out << FormatDouble(r.value(a)) << ',';
    out << FormatDouble(r.norm) << '\n';
  }
  return out.str();
}

}  // namespace steinest
