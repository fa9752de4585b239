#include "obsgrass/metrics.hpp"

#include "obsgrass/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace obsgrass {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

TaskAccuracyMatrix::TaskAccuracyMatrix(Index tasks) : acc_(Matrix::Constant(tasks, tasks, kNaN)) {
  if (tasks < 1) throw Error(ErrorCode::InsufficientTasks, "accuracy matrix needs at least one task");
}

TaskAccuracyMatrix TaskAccuracyMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  TaskAccuracyMatrix out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != k + 1) {
      throw Error(ErrorCode::DimensionMismatch, "accuracy row " + std::to_string(k) + " must have " +
                                                    std::to_string(k + 1) + " entries");
    }
    for (std::size_t j = 0; j <= k; ++j) out.set(static_cast<Index>(k), static_cast<Index>(j), rows[k][j]);
  }
  return out;
}

void TaskAccuracyMatrix::set(Index k, Index j, double accuracy) {
  if (k < 0 || k >= tasks() || j < 0 || j > k) {
    throw Error(ErrorCode::DimensionMismatch, "accuracy entry must satisfy 0 <= j <= k < T");
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "accuracy must lie in [0, 1]");
  }
  acc_(k, j) = accuracy;
}

bool TaskAccuracyMatrix::complete() const {
  for (Index k = 0; k < tasks(); ++k) {
    for (Index j = 0; j <= k; ++j) {
      if (std::isnan(acc_(k, j))) return false;
    }
  }
  return true;
}

std::optional<double> CLMetrics::final_fm() const {
  if (fm.size() < 2) return std::nullopt;
  return fm[fm.size() - 1];
}

double forgetting_measure(const TaskAccuracyMatrix& acc, Index k) {
  if (k < 2) throw Error(ErrorCode::InsufficientTasks, "forgetting needs k >= 2");
  if (k > acc.tasks()) throw Error(ErrorCode::DimensionMismatch, "forgetting: k exceeds task count");
  const Index last = k - 1;
  double sum = 0.0;
  for (Index j = 0; j < last; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index i = j; i < last; ++i) best = std::max(best, acc(i, j) - acc(last, j));
    sum += std::max(0.0, best);  // backward transfer is not negative forgetting
  }
  return sum / static_cast<double>(k - 1);
}

CLMetrics compute_metrics(const TaskAccuracyMatrix& acc) {
  if (!acc.complete()) throw Error(ErrorCode::ConfigError, "compute_metrics: accuracy matrix has missing entries");
  const Index tasks = acc.tasks();
  CLMetrics m{Vector(tasks), Vector(tasks), Vector::Constant(tasks, kNaN)};
  double aa_running = 0.0;
  for (Index k = 0; k < tasks; ++k) {
    double sum = 0.0;
    for (Index j = 0; j <= k; ++j) sum += acc(k, j);
    m.aa[k] = sum / static_cast<double>(k + 1);
    aa_running += m.aa[k];
    m.aia[k] = aa_running / static_cast<double>(k + 1);
    if (k >= 1) m.fm[k] = forgetting_measure(acc, k + 1);
  }
  return m;
}

double hsic_linear(const Matrix& w1, const Matrix& w2) {
  if (w1.rows() != w2.rows() || w1.rows() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "hsic: inputs need the same number (>= 2) of rows");
  }
  // With K = X X^T, tr(K H L H) = ||X_c^T Y_c||_F^2 for column-centred X, Y.
  const Matrix x = w1.rowwise() - w1.colwise().mean();
  const Matrix y = w2.rowwise() - w2.colwise().mean();
  const double m1 = static_cast<double>(w1.rows() - 1);
  return (x.transpose() * y).squaredNorm() / (m1 * m1);
}

double ckd(const Matrix& w1, const Matrix& w2) {
  const double self1 = hsic_linear(w1, w1);
  const double self2 = hsic_linear(w2, w2);
  if (!(self1 > 1e-300) || !(self2 > 1e-300)) {
    throw Error(ErrorCode::DegenerateKernel, "ckd: centred kernel has zero norm");
  }
  const double cka = hsic_linear(w1, w2) / std::sqrt(self1 * self2);
  return 1.0 - cka;
}

}  // namespace obsgrass
