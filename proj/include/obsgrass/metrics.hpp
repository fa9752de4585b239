#pragma once

#include "obsgrass/ssm.hpp"

#include <optional>
#include <vector>

namespace obsgrass {

/// a(k, j): accuracy on task j's test split after training task k (0-based,
/// defined for j <= k). Entries start undefined (NaN).
class TaskAccuracyMatrix {
 public:
  explicit TaskAccuracyMatrix(Index tasks);
  /// Builds from ragged rows; row k must hold k+1 entries.
  static TaskAccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows);

  Index tasks() const noexcept { return acc_.rows(); }
  double operator()(Index k, Index j) const { return acc_(k, j); }
  void set(Index k, Index j, double accuracy);
  bool complete() const;
  const Matrix& raw() const noexcept { return acc_; }

 private:
  Matrix acc_;
};

/// Per-k metrics (index k-1 holds the value after task k). fm[0] is NaN
/// because forgetting needs at least two tasks.
struct CLMetrics {
  Vector aa;
  Vector aia;
  Vector fm;

  std::optional<double> final_fm() const;
};

/// AA_k = mean_j a(k, j); AIA_k = mean_{i<=k} AA_i;
/// FM_k = mean_{j<k} max(0, max_{j<=i<k} (a(i, j) - a(k, j))).
CLMetrics compute_metrics(const TaskAccuracyMatrix& acc);

/// FM after task k (1-based). Throws InsufficientTasks for k < 2.
double forgetting_measure(const TaskAccuracyMatrix& acc, Index k);

/// Linear-kernel HSIC with centering: tr(K H L H) / (m - 1)^2.
double hsic_linear(const Matrix& w1, const Matrix& w2);

/// 1 - HSIC(W1, W2) / sqrt(HSIC(W1, W1) HSIC(W2, W2)). Rows are samples.
/// Throws DegenerateKernel when a self-HSIC underflows.
double ckd(const Matrix& w1, const Matrix& w2);

}  // namespace obsgrass
