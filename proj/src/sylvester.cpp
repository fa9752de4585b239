#include "obsgrass/sylvester.hpp"

#include "obsgrass/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace obsgrass {

namespace {

void check_pair(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2, const char* who) {
  const Index n = a.rows();
  if (n < 1 || a.cols() != n || c.size() != n || a2.rows() != n || a2.cols() != n || c2.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, std::string(who) + ": inconsistent shapes");
  }
}

}  // namespace

GramMatrix gram_truncated(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2,
                          Index horizon) {
  check_pair(a, c, a2, c2, "gram_truncated");
  if (horizon < 1) throw Error(ErrorCode::DimensionMismatch, "gram_truncated: horizon must be >= 1");
  const Index n = a.rows();

  // (A^T)^t C^T C' (A')^t = (C A^t)^T (C' A'^t): accumulate outer products of
  // the observability rows.
  Matrix g = Matrix::Zero(n, n);
  RowVector left = c;
  RowVector right = c2;
  for (Index t = 0; t < horizon; ++t) {
    g.noalias() += left.transpose() * right;
    left = left * a;
    right = right * a2;
  }
  if (!g.allFinite()) throw Error(ErrorCode::NonFinite, "gram_truncated: series overflowed");
  const auto n3 = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
  return {std::move(g), static_cast<std::uint64_t>(horizon) * (2 * n3 + static_cast<std::uint64_t>(n * n))};
}

GramMatrix gram_sylvester_dense(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2) {
  check_pair(a, c, a2, c2, "gram_sylvester_dense");
  const Index n = a.rows();
  const Index nn = n * n;

  // Column-major vec: vec(A^T G A') = (A'^T kron A^T) vec(G).
  Matrix system(nn, nn);
  for (Index q = 0; q < n; ++q) {
    for (Index p = 0; p < n; ++p) {
      system.block(q * n, p * n, n, n) = a2(p, q) * a.transpose();
    }
  }
  system.diagonal().array() -= 1.0;

  const Matrix rhs_mat = -(c.transpose() * c2);
  const Eigen::Map<const Vector> rhs(rhs_mat.data(), nn);

  const Eigen::VectorXcd ev1 = a.eigenvalues();
  const Eigen::VectorXcd ev2 = a2.eigenvalues();
  double closest = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) closest = std::min(closest, std::abs(1.0 - ev1[i] * ev2[j]));
  }
  if (!(closest > 1e-10)) {
    throw Error(ErrorCode::NoUniqueSolution,
                "gram_sylvester_dense: Kronecker system is singular (an eigenvalue product is ~1)");
  }
  Vector sol = Eigen::PartialPivLU<Matrix>(system).solve(rhs);
  if (!sol.allFinite()) throw Error(ErrorCode::NonFinite, "gram_sylvester_dense: non-finite solution");
  Matrix g = Eigen::Map<Matrix>(sol.data(), n, n);
  const auto n3 = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
  return {std::move(g), 25 * n3};
}

GramMatrix gram_diagonal(const Vector& a_diag, const RowVector& c, const Vector& a2_diag, const RowVector& c2,
                         double denominator_eps) {
  const Index n = a_diag.size();
  if (n < 1 || c.size() != n || a2_diag.size() != n || c2.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "gram_diagonal: inconsistent sizes");
  }
  Matrix g(n, n);
  std::uint64_t flops = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double numerator = c[i] * c2[j];           // 1
      const double product = a_diag[i] * a2_diag[j];   // 1
      const double denominator = 1.0 - product;        // 1
      if (!(std::abs(denominator) >= denominator_eps)) {
        throw Error(ErrorCode::DivisionNearOne, "gram_diagonal: |1 - a_i a'_j| = " +
                                                    std::to_string(std::abs(denominator)) + " at (" +
                                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
      g(i, j) = numerator / denominator;               // 1
      flops += 4;
    }
  }
  return {std::move(g), flops};
}

GramMatrix gram(const AnySSM& s1, const AnySSM& s2) {
  const auto* d1 = std::get_if<DiagonalSSM>(&s1);
  const auto* d2 = std::get_if<DiagonalSSM>(&s2);
  if (d1 != nullptr && d2 != nullptr) return gram_diagonal(d1->a_diag(), d1->c(), d2->a_diag(), d2->c());
  const DenseSSM x = as_dense(s1);
  const DenseSSM y = as_dense(s2);
  return gram_sylvester_dense(x.a(), x.c(), y.a(), y.c());
}

double sylvester_residual(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2,
                          const Matrix& g) {
  return (a.transpose() * g * a2 - g + c.transpose() * c2).norm();
}

FlopsReport count_flops(std::string_view solver_name, Index n, Index horizon) {
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "count_flops: n must be >= 1");
  const auto un = static_cast<std::uint64_t>(n);
  FlopsReport report{std::string(solver_name), n, 0, 0.0};
  if (solver_name == "diagonal") {
    report.flops = 4 * un * un;
  } else if (solver_name == "dense" || solver_name == "dense-reference") {
    report.flops = 25 * un * un * un;
  } else if (solver_name == "truncated") {
    if (horizon < 1) throw Error(ErrorCode::DimensionMismatch, "count_flops: horizon must be >= 1");
    report.flops = static_cast<std::uint64_t>(horizon) * (2 * un * un * un + un * un);
  } else {
    throw Error(ErrorCode::UnknownSolver, "count_flops: unknown solver '" + std::string(solver_name) + "'");
  }
  return report;
}

std::string to_csv_row(const FlopsReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << report.solver_name << ',' << report.n << ',' << report.flops << ',' << report.wall_time;
  return os.str();
}

}  // namespace obsgrass
