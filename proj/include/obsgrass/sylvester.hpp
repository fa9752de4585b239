#pragma once

#include "obsgrass/ssm.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace obsgrass {

/// G = O(A, C)^T O(A', C'), the inner-product matrix between two extended
/// observability matrices. `flops` is the operation count of the route that
/// produced it (0 when the route does not count).
struct GramMatrix {
  Matrix g;
  std::uint64_t flops = 0;

  Index n() const noexcept { return g.rows(); }
};

/// Brute-force oracle: sum_{t<K} (A^T)^t C^T C' (A')^t.
GramMatrix gram_truncated(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2,
                          Index horizon);

/// Unique G with A^T G A' - G = -C^T C', solved through the Kronecker
/// vectorization (A'^T (x) A^T - I) vec(G) = -vec(C^T C') by dense LU.
GramMatrix gram_sylvester_dense(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2);

inline constexpr double kDiagonalDenominatorEps = 1e-9;

/// Closed form for diagonal transitions: G[i,j] = c[i] c2[j] / (1 - a[i] a2[j]).
/// Reports exactly 4 n^2 flops.
GramMatrix gram_diagonal(const Vector& a_diag, const RowVector& c, const Vector& a2_diag, const RowVector& c2,
                         double denominator_eps = kDiagonalDenominatorEps);

/// Convenience dispatch: diagonal pairs use the closed form, anything else
/// goes through the dense solve.
GramMatrix gram(const AnySSM& s1, const AnySSM& s2);

/// Residual ||A^T G A' - G + C^T C'||_F.
double sylvester_residual(const Matrix& a, const RowVector& c, const Matrix& a2, const RowVector& c2,
                          const Matrix& g);

struct FlopsReport {
  std::string solver_name;
  Index n = 0;
  std::uint64_t flops = 0;
  double wall_time = 0.0;  // seconds; zero for analytic reports
};

/// Analytic operation counts:
///   "diagonal"                    4 n^2
///   "dense" / "dense-reference"   25 n^3  (Bartels-Stewart reference figure)
///   "truncated"                   K (2 n^3 + n^2)
/// Throws UnknownSolver for any other name.
FlopsReport count_flops(std::string_view solver_name, Index n, Index horizon = 1);

/// CSV header matching FlopsReport rows.
inline constexpr std::string_view kFlopsCsvHeader = "solver,n,flops,wall_time_s";
std::string to_csv_row(const FlopsReport& report);

}  // namespace obsgrass
