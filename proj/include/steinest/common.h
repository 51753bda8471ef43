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

#ifndef STEINEST_COMMON_H_
#define STEINEST_COMMON_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace steinest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Small fixed-capacity types used inside pair loops so that no heap
// allocation happens per pair.
inline constexpr int kMaxDim = 16;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using SmallMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using PointRef = Eigen::Ref<const Eigen::VectorXd>;

// Invalid input: unknown ids, parameters outside their domain, shape errors.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Valid input that leads to a non-finite or singular computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An n x d batch of observations stored row-major.
class Sample {
 public:
  Sample() = default;
  Sample(Index n, Index d) : data_(RowMatrix::Zero(n, d)) {}
  explicit Sample(RowMatrix data);
  static Sample FromColumn(const Vector& values);

  Index size() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }

  Eigen::Map<const Vector> point(Index i) const {
    return Eigen::Map<const Vector>(data_.data() + i * data_.cols(),
                                    data_.cols());
  }
  Eigen::Map<Vector> mutable_point(Index i) {
    return Eigen::Map<Vector>(data_.data() + i * data_.cols(), data_.cols());
  }

  const RowMatrix& data() const { return data_; }
  RowMatrix& mutable_data() { return data_; }

  Sample Subset(std::span<const Index> rows) const;

 private:
  RowMatrix data_;
};

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  void Add(const CompensatedSum& other) {
    Add(other.sum_);
    Add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Element-wise compensated accumulator for vectors and matrices.
class CompensatedArray {
 public:
  CompensatedArray() = default;
  explicit CompensatedArray(Index size) : parts_(size) {}
  void Resize(Index size) { parts_.assign(size, CompensatedSum()); }
  template <typename Derived>
  void Add(const Eigen::DenseBase<Derived>& x) {
    Index k = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      for (Index i = 0; i < x.rows(); ++i) parts_[k++].Add(x(i, j));
    }
  }
  void Add(const CompensatedArray& other) {
    for (std::size_t k = 0; k < parts_.size(); ++k) parts_[k].Add(other.parts_[k]);
  }
  Matrix Value(Index rows, Index cols) const;

 private:
  std::vector<CompensatedSum> parts_;
};

// Worker count from STEIN_ESTIM_THREADS, defaulting to hardware concurrency.
int WorkerCount();

// Runs body(i) for i in [0, count). Work is spread over WorkerCount()
// threads unless already inside a parallel region, in which case it runs
// inline. Callers must write results into per-index slots; the first
// exception thrown by any body is rethrown.
void ParallelFor(std::size_t count, const std::function<void(std::size_t)>& body);

// Rows are grouped into blocks of this many for deterministic reductions.
inline constexpr Index kReductionBlock = 32;

// Deterministic per-stream seeds.
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream);

using Rng = std::mt19937_64;

// Solves (a + lambda I) x = b for symmetric positive semi-definite a with
// lambda = lambda_rel * trace(a) / dim. Throws NumericalError if the
// regularized matrix is not positive definite.
Matrix RegularizedSolve(const Matrix& a, const Matrix& b, double lambda_rel);

Matrix Symmetrize(const Matrix& a);

bool AllFinite(const Eigen::Ref<const Matrix>& a);

// Shortest decimal text that round-trips; "nan", "inf", "-inf" otherwise.
std::string FormatDouble(double v);

}  // namespace steinest

#endif  // STEINEST_COMMON_H_
