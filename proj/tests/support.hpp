#pragma once

#include "obsgrass/ssm.hpp"

#include <cmath>
#include <random>

namespace testing {

using obsgrass::Index;
using obsgrass::Matrix;
using obsgrass::RowVector;
using obsgrass::Vector;

inline Vector normal_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline Vector uniform_vector(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Diagonal transition with |a_i| <= rho.
inline obsgrass::DiagonalSSM random_diagonal(std::mt19937_64& rng, Index n, double rho = 0.9) {
  return {uniform_vector(rng, n, -rho, rho), normal_vector(rng, n), normal_vector(rng, n).transpose()};
}

// Dense Gaussian transition rescaled so its spectral radius is rho.
inline obsgrass::DenseSSM random_dense(std::mt19937_64& rng, Index n, double rho = 0.8) {
  Matrix a = normal_matrix(rng, n, n);
  Eigen::EigenSolver<Matrix> es(a, false);
  a *= rho / es.eigenvalues().cwiseAbs().maxCoeff();
  return {a, normal_vector(rng, n), normal_vector(rng, n).transpose()};
}

// Invertible P = Q1 diag(s) Q2 with singular values spread over [1, cond].
inline Matrix random_invertible(std::mt19937_64& rng, Index n, double cond) {
  const Matrix q1 = normal_matrix(rng, n, n).householderQr().householderQ();
  const Matrix q2 = normal_matrix(rng, n, n).householderQr().householderQ();
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    s[i] = n == 1 ? 1.0 : std::pow(cond, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return q1 * s.asDiagonal() * q2;
}

// Sum_{t<K} (A^T)^t C^T C' (A')^t by explicit powers.
inline Matrix gram_oracle(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2, Index k) {
  Matrix g = Matrix::Zero(a.rows(), a2.rows());
  RowVector row1 = c;
  RowVector row2 = c2;
  for (Index t = 0; t < k; ++t) {
    g += row1.transpose() * row2;
    row1 = row1 * a;
    row2 = row2 * a2;
  }
  return g;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::max(std::abs(got), std::abs(want)));
}

}  // namespace testing
