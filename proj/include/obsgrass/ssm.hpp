#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <variant>
#include <vector>

namespace obsgrass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// General single-input single-output system h(t) = A h(t-1) + B x(t),
/// y(t) = C h(t). Construction validates shapes and finiteness.
class DenseSSM {
 public:
  DenseSSM(Matrix a, Vector b, RowVector c);

  const Matrix& a() const noexcept { return a_; }
  const Vector& b() const noexcept { return b_; }
  const RowVector& c() const noexcept { return c_; }
  Index n() const noexcept { return a_.rows(); }

 private:
  Matrix a_;
  Vector b_;
  RowVector c_;
};

/// Structured system whose state transition is diag(a_diag).
class DiagonalSSM {
 public:
  DiagonalSSM(Vector a_diag, Vector b, RowVector c);

  const Vector& a_diag() const noexcept { return a_diag_; }
  const Vector& b() const noexcept { return b_; }
  const RowVector& c() const noexcept { return c_; }
  Index n() const noexcept { return a_diag_.size(); }

  /// max_i |a_diag[i]| < 1
  bool schur_stable() const noexcept;
  DenseSSM to_dense() const;

 private:
  Vector a_diag_;
  Vector b_;
  RowVector c_;
};

using AnySSM = std::variant<DenseSSM, DiagonalSSM>;

Index state_dim(const AnySSM& ssm);
DenseSSM as_dense(const AnySSM& ssm);
double spectral_radius(const AnySSM& ssm);
bool is_schur_stable(const AnySSM& ssm);

// ---------------------------------------------------------------------------
// Discretization

/// Scaling-and-squaring Padé exponential; throws NonFinite on overflow.
Matrix matrix_exp(const Matrix& m);

enum class ZohMethod {
  Series,        // sum_k delta^{k+1} A^k / (k+1)! B, valid for singular A
  ExactInverse,  // (delta A)^{-1} (exp(delta A) - I) delta B
};

struct Discretized {
  Matrix a_bar;
  Vector b_bar;
};

Discretized discretize_zoh(const Matrix& a_cont, const Vector& b_cont, double delta,
                           ZohMethod method = ZohMethod::Series);

/// Elementwise ZOH for a diagonal continuous-time system; c is carried over.
DiagonalSSM discretize_zoh(const DiagonalSSM& continuous, double delta);

// ---------------------------------------------------------------------------
// Simulation and realizations

struct SimulationTrace {
  Matrix hidden;   // T x n, row t holds h(t+1)
  Vector inputs;   // T
  Vector outputs;  // T
};

SimulationTrace simulate(const AnySSM& ssm, const Vector& inputs, const Vector& h0);

double condition_number(const Matrix& m);

/// (P A P^-1, P B, C P^-1). Throws SingularTransform when cond(P) exceeds
/// max_condition.
DenseSSM p_transform(const DenseSSM& ssm, const Matrix& p, double max_condition = 1e6);

// ---------------------------------------------------------------------------
// Soft normalization and S6 state aggregation

/// SN(x) = 2 / (1 + exp(-x)) - 1, kept strictly inside (-1, 1).
double soft_normalize(double x) noexcept;
Matrix soft_normalize(const Matrix& x);

/// d SN / dx expressed through y = SN(x): (1 - y^2) / 2.
inline double soft_normalize_derivative_from_output(double y) noexcept {
  return 0.5 * (1.0 - y * y);
}

/// Discretized selective-SSM states for one sequence: a_bar[t] and b_bar[t]
/// are o x n (outer channels by state), c is tau x n.
struct SequenceStateBundle {
  std::vector<Matrix> a_bar;
  std::vector<Matrix> b_bar;
  Matrix c;

  Index tau() const noexcept { return c.rows(); }
  Index outer() const noexcept { return a_bar.empty() ? 0 : a_bar.front().rows(); }
  Index state_dim() const noexcept { return c.cols(); }

  /// Throws DimensionMismatch / NonFinite when the bundle is malformed.
  void validate() const;
};

/// Per-timestep (A~, B~, C~), each tau x n with entries in (-1, 1).
struct AggregatedStates {
  Matrix a_tilde;
  Matrix b_tilde;
  Matrix c_tilde;

  Index tau() const noexcept { return a_tilde.rows(); }
  Index n() const noexcept { return a_tilde.cols(); }

  /// The time-slice t viewed as a diagonal SSM (A~_t, B~_t, C~_t).
  DiagonalSSM slice(Index t) const;
};

AggregatedStates aggregate_states(const SequenceStateBundle& bundle);

// ---------------------------------------------------------------------------
// Observability

/// Rows C, CA, CA^2, ..., CA^{K-1}.
Matrix truncated_observability(const AnySSM& ssm, Index horizon);

/// Smallest K with rho^K < tol, capped at `cap`.
Index default_horizon(double spectral_radius, double tol = 1e-12, Index cap = 5000);

}  // namespace obsgrass
