#pragma once

#include "obsgrass/ssm.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace obsgrass {

enum class Metric { Chordal, Simplified, BinetCauchy, FubiniStudy, Martin, Geodesic };

std::string_view to_string(Metric metric) noexcept;
/// Accepts the names printed by to_string plus a few aliases
/// ("binet", "fubini"); returns nullopt otherwise.
std::optional<Metric> parse_metric(std::string_view name) noexcept;

/// Principal angles in [0, pi/2], ascending.
struct PrincipalAngles {
  Vector angles;
};

/// `value` is the metric's natural quantity:
///   chordal (Gram form)   d^2 = 2n - 2 sum cos^2
///   chordal (angle form)  d   = sqrt(sum sin^2)
///   simplified            1 - cos^2(theta) of the rank-1 model
///   binet/fubini/martin/geodesic   the distance itself
struct SubspaceDistance {
  double value = 0.0;
  Metric metric = Metric::Chordal;
};

/// Orthonormal basis of span(m) via thin SVD. Throws RankDeficient when a
/// singular value falls below rank_tol * sigma_max.
Matrix orthonormal_basis(const Matrix& m, double rank_tol = 1e-10);

/// Angles between the column spans of two orthonormal bases.
PrincipalAngles principal_angles_from_bases(const Matrix& x, const Matrix& z);

PrincipalAngles principal_angles_truncated(const Matrix& o1, const Matrix& o2, double rank_tol = 1e-10);

inline constexpr double kGramConditionLimit = 1e12;

/// Squared chordal distance between the extended observability subspaces,
/// 2n - 2 Tr(G1^-1 G3 G2^-1 G3^T), with Grams from the Sylvester routes.
/// Throws IllConditionedGram when cond(G1) or cond(G2) exceeds the limit.
SubspaceDistance chordal_distance_sq(const AnySSM& s1, const AnySSM& s2,
                                     double condition_limit = kGramConditionLimit);

inline constexpr double kEqualityGuardEps = 1e-12;

/// cos^2(theta) = Tr(G3 G4) / (Tr(G1) Tr(G2)) from the rank-1 model of O.
/// Returns exactly 1 when both A and C agree within eps (sup norm).
double simplified_cos_sq(const DiagonalSSM& s1, const DiagonalSSM& s2, double eps = kEqualityGuardEps);

/// 1 - simplified_cos_sq.
SubspaceDistance simplified_distance(const DiagonalSSM& s1, const DiagonalSSM& s2, double eps = kEqualityGuardEps);

/// Closed-form metrics of the principal angles. Metric::Chordal here is
/// sqrt(sum sin^2 theta); Metric::Simplified is rejected.
SubspaceDistance classical_distance(const PrincipalAngles& angles, Metric metric);

}  // namespace obsgrass
