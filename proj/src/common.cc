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

#include "steinest/common.h"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace steinest {

Sample::Sample(RowMatrix data) : data_(std::move(data)) {
  if (!data_.allFinite()) throw ConfigError("sample contains non-finite entries");
}

Sample Sample::FromColumn(const Vector& values) {
  RowMatrix m(values.size(), 1);
  m.col(0) = values;
  return Sample(std::move(m));
}

Sample Sample::Subset(std::span<const Index> rows) const {
  RowMatrix out(static_cast<Index>(rows.size()), dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Index>(k)) = data_.row(rows[k]);
  }
  Sample s;
  s.data_ = std::move(out);
  return s;
}

Matrix CompensatedArray::Value(Index rows, Index cols) const {
  Matrix out(rows, cols);
  Index k = 0;
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = parts_[k++].value();
  }
  return out;
}

int WorkerCount() {
  if (const char* env = std::getenv("STEIN_ESTIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(std::min<long>(v, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {
thread_local bool in_parallel_region = false;
}  // namespace

void ParallelFor(std::size_t count,
                 const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(WorkerCount()), count);
  if (in_parallel_region || workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
    in_parallel_region = false;
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(run);
  run();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(SplitMix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

Matrix Symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix RegularizedSolve(const Matrix& a, const Matrix& b, double lambda_rel) {
  const Index m = a.rows();
  Matrix reg = Symmetrize(a);
  const double lambda = lambda_rel * reg.trace() / static_cast<double>(m);
  reg.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(reg);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(reg, Eigen::EigenvaluesOnly);
    throw NumericalError("information matrix is singular after ridge; min eigenvalue " +
                         std::to_string(eig.eigenvalues()(0)));
  }
  Matrix x = llt.solve(b);
  if (!x.allFinite()) throw NumericalError("regularized solve produced non-finite values");
  return x;
}

bool AllFinite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace steinest
