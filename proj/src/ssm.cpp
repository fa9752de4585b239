#include "obsgrass/ssm.hpp"

#include "obsgrass/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace obsgrass {

namespace {

void require_finite(const auto& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

std::string shape(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace

DenseSSM::DenseSSM(Matrix a, Vector b, RowVector c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  const Index n = a_.rows();
  if (n < 1 || a_.cols() != n || b_.size() != n || c_.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "dense SSM shapes a=" + shape(a_.rows(), a_.cols()) +
                                                  " b=" + std::to_string(b_.size()) +
                                                  " c=" + std::to_string(c_.size()));
  }
  require_finite(a_, "a");
  require_finite(b_, "b");
  require_finite(c_, "c");
}

DiagonalSSM::DiagonalSSM(Vector a_diag, Vector b, RowVector c)
    : a_diag_(std::move(a_diag)), b_(std::move(b)), c_(std::move(c)) {
  const Index n = a_diag_.size();
  if (n < 1 || b_.size() != n || c_.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "diagonal SSM sizes a=" + std::to_string(n) +
                                                  " b=" + std::to_string(b_.size()) +
                                                  " c=" + std::to_string(c_.size()));
  }
  require_finite(a_diag_, "a_diag");
  require_finite(b_, "b");
  require_finite(c_, "c");
}

bool DiagonalSSM::schur_stable() const noexcept { return a_diag_.cwiseAbs().maxCoeff() < 1.0; }

DenseSSM DiagonalSSM::to_dense() const { return DenseSSM(a_diag_.asDiagonal(), b_, c_); }

Index state_dim(const AnySSM& ssm) {
  return std::visit([](const auto& s) { return s.n(); }, ssm);
}

DenseSSM as_dense(const AnySSM& ssm) {
  if (const auto* d = std::get_if<DiagonalSSM>(&ssm)) return d->to_dense();
  return std::get<DenseSSM>(ssm);
}

double spectral_radius(const AnySSM& ssm) {
  if (const auto* d = std::get_if<DiagonalSSM>(&ssm)) return d->a_diag().cwiseAbs().maxCoeff();
  const Matrix& a = std::get<DenseSSM>(ssm).a();
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NonFinite, "eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur_stable(const AnySSM& ssm) { return spectral_radius(ssm) < 1.0; }

Matrix matrix_exp(const Matrix& m) {
  Matrix out = m.exp();
  require_finite(out, "matrix exponential");
  return out;
}

Discretized discretize_zoh(const Matrix& a_cont, const Vector& b_cont, double delta, ZohMethod method) {
  const Index n = a_cont.rows();
  if (a_cont.cols() != n || b_cont.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "discretize_zoh: a=" + shape(a_cont.rows(), a_cont.cols()) +
                                                  " b=" + std::to_string(b_cont.size()));
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::ConfigError, "discretize_zoh: delta must be positive and finite");
  }

  if (method == ZohMethod::Series) {
    // exp([[dA, dB], [0, 0]]) carries sum_k (dA)^k dB / (k+1)! in its last column.
    Matrix block = Matrix::Zero(n + 1, n + 1);
    block.topLeftCorner(n, n) = delta * a_cont;
    block.topRightCorner(n, 1) = delta * b_cont;
    const Matrix e = matrix_exp(block);
    return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
  }

  const Matrix da = delta * a_cont;
  const Matrix a_bar = matrix_exp(da);
  Eigen::PartialPivLU<Matrix> lu(da);
  if (!(lu.rcond() > 1e-12)) {
    throw Error(ErrorCode::SingularState, "discretize_zoh: a_cont is singular; use the series method");
  }
  Vector b_bar = lu.solve((a_bar - Matrix::Identity(n, n)) * (delta * b_cont));
  require_finite(b_bar, "b_bar");
  return {a_bar, b_bar};
}

DiagonalSSM discretize_zoh(const DiagonalSSM& continuous, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::ConfigError, "discretize_zoh: delta must be positive and finite");
  }
  const Index n = continuous.n();
  Vector a_bar(n);
  Vector b_bar(n);
  for (Index i = 0; i < n; ++i) {
    const double x = delta * continuous.a_diag()[i];
    a_bar[i] = std::exp(x);
    // expm1(x)/x -> 1 as x -> 0
    const double phi = (x == 0.0) ? 1.0 : std::expm1(x) / x;
    b_bar[i] = phi * delta * continuous.b()[i];
  }
  require_finite(a_bar, "a_bar");
  require_finite(b_bar, "b_bar");
  return DiagonalSSM(std::move(a_bar), std::move(b_bar), continuous.c());
}

SimulationTrace simulate(const AnySSM& ssm, const Vector& inputs, const Vector& h0) {
  const Index n = state_dim(ssm);
  const Index steps = inputs.size();
  if (steps < 1) throw Error(ErrorCode::DimensionMismatch, "simulate: need at least one input");
  if (h0.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "simulate: h0 has size " + std::to_string(h0.size()) +
                                                  ", expected " + std::to_string(n));
  }

  SimulationTrace trace{Matrix(steps, n), inputs, Vector(steps)};
  Vector h = h0;
  std::visit(
      [&](const auto& s) {
        for (Index t = 0; t < steps; ++t) {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DiagonalSSM>) {
            h = s.a_diag().cwiseProduct(h) + s.b() * inputs[t];
          } else {
            h = s.a() * h + s.b() * inputs[t];
          }
          trace.hidden.row(t) = h.transpose();
          trace.outputs[t] = s.c().dot(h);
        }
      },
      ssm);
  require_finite(trace.hidden, "simulated state");
  return trace;
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smallest = s[s.size() - 1];
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smallest;
}

DenseSSM p_transform(const DenseSSM& ssm, const Matrix& p, double max_condition) {
  const Index n = ssm.n();
  if (p.rows() != n || p.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "p_transform: P is " + shape(p.rows(), p.cols()) +
                                                  ", expected " + shape(n, n));
  }
  const double cond = condition_number(p);
  if (!(cond < max_condition)) {
    throw Error(ErrorCode::SingularTransform, "p_transform: condition number " + std::to_string(cond));
  }
  Eigen::PartialPivLU<Matrix> lu(p);
  const Matrix p_inv = lu.inverse();
  return DenseSSM(p * ssm.a() * p_inv, p * ssm.b(), ssm.c() * p_inv);
}

double soft_normalize(double x) noexcept {
  static constexpr double kEdge = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(std::tanh(0.5 * x), -kEdge, kEdge);
}

Matrix soft_normalize(const Matrix& x) {
  return x.unaryExpr([](double v) { return soft_normalize(v); });
}

void SequenceStateBundle::validate() const {
  const Index steps = c.rows();
  if (steps < 1) throw Error(ErrorCode::DimensionMismatch, "bundle: tau must be >= 1");
  if (static_cast<Index>(a_bar.size()) != steps || static_cast<Index>(b_bar.size()) != steps) {
    throw Error(ErrorCode::DimensionMismatch, "bundle: a_bar/b_bar must have tau slices");
  }
  const Index o = a_bar.front().rows();
  if (o < 1) throw Error(ErrorCode::DimensionMismatch, "bundle: outer dimension must be >= 1");
  for (Index t = 0; t < steps; ++t) {
    const auto& a = a_bar[static_cast<std::size_t>(t)];
    const auto& b = b_bar[static_cast<std::size_t>(t)];
    if (a.rows() != o || b.rows() != o || a.cols() != c.cols() || b.cols() != c.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "bundle: slice " + std::to_string(t) + " has inconsistent shape");
    }
    require_finite(a, "a_bar");
    require_finite(b, "b_bar");
  }
  require_finite(c, "c");
}

DiagonalSSM AggregatedStates::slice(Index t) const {
  return DiagonalSSM(a_tilde.row(t).transpose(), b_tilde.row(t).transpose(), c_tilde.row(t));
}

AggregatedStates aggregate_states(const SequenceStateBundle& bundle) {
  bundle.validate();
  const Index steps = bundle.tau();
  const Index n = bundle.state_dim();
  AggregatedStates out{Matrix(steps, n), Matrix(steps, n), soft_normalize(bundle.c)};
  for (Index t = 0; t < steps; ++t) {
    const auto st = static_cast<std::size_t>(t);
    out.a_tilde.row(t) = bundle.a_bar[st].colwise().mean().unaryExpr([](double v) { return soft_normalize(v); });
    out.b_tilde.row(t) = bundle.b_bar[st].colwise().mean().unaryExpr([](double v) { return soft_normalize(v); });
  }
  return out;
}

Matrix truncated_observability(const AnySSM& ssm, Index horizon) {
  if (horizon < 1) throw Error(ErrorCode::DimensionMismatch, "truncated_observability: horizon must be >= 1");
  const Index n = state_dim(ssm);
  Matrix o(horizon, n);
  std::visit(
      [&](const auto& s) {
        RowVector row = s.c();
        for (Index t = 0; t < horizon; ++t) {
          o.row(t) = row;
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DiagonalSSM>) {
            row = row.cwiseProduct(s.a_diag().transpose());
          } else {
            row = row * s.a();
          }
        }
      },
      ssm);
  require_finite(o, "observability matrix");
  return o;
}

Index default_horizon(double rho, double tol, Index cap) {
  if (!(rho > 0.0)) return 1;
  if (rho >= 1.0) return cap;
  Index k = static_cast<Index>(std::ceil(std::log(tol) / std::log(rho)));
  k = std::max<Index>(k, 1);
  while (k < cap && std::pow(rho, static_cast<double>(k)) >= tol) ++k;
  return std::min(k, cap);
}

}  // namespace obsgrass
