#include "obsgrass/grassmann.hpp"

#include "obsgrass/error.hpp"
#include "obsgrass/sylvester.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace obsgrass {

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::Chordal: return "chordal";
    case Metric::Simplified: return "simplified";
    case Metric::BinetCauchy: return "binet_cauchy";
    case Metric::FubiniStudy: return "fubini_study";
    case Metric::Martin: return "martin";
    case Metric::Geodesic: return "geodesic";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) noexcept {
  if (name == "chordal") return Metric::Chordal;
  if (name == "simplified" || name == "infssm") return Metric::Simplified;
  if (name == "binet_cauchy" || name == "binet" || name == "binet-cauchy") return Metric::BinetCauchy;
  if (name == "fubini_study" || name == "fubini" || name == "fubini-study") return Metric::FubiniStudy;
  if (name == "martin") return Metric::Martin;
  if (name == "geodesic") return Metric::Geodesic;
  return std::nullopt;
}

Matrix orthonormal_basis(const Matrix& m, double rank_tol) {
  if (m.cols() < 1 || m.rows() < m.cols()) {
    throw Error(ErrorCode::RankDeficient, "orthonormal_basis: need at least as many rows as columns");
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (!(s[s.size() - 1] > rank_tol * s[0])) {
    throw Error(ErrorCode::RankDeficient, "orthonormal_basis: singular value ratio " +
                                              std::to_string(s[s.size() - 1] / s[0]) + " below tolerance");
  }
  return svd.matrixU();
}

PrincipalAngles principal_angles_from_bases(const Matrix& x, const Matrix& z) {
  if (x.rows() != z.rows() || x.cols() != z.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "principal angles: bases must have equal shapes");
  }
  const Index k = x.cols();
  const Matrix cross = x.transpose() * z;
  Eigen::BDCSVD<Matrix> cos_svd(cross);
  Vector cosines = cos_svd.singularValues();  // descending
  // Sines come from the component of z orthogonal to span(x); they resolve
  // small angles that arccos cannot.
  const Matrix residual = z - x * cross;
  Eigen::BDCSVD<Matrix> sin_svd(residual);
  Vector sines = sin_svd.singularValues();
  std::sort(sines.data(), sines.data() + sines.size());  // ascending

  PrincipalAngles out{Vector(k)};
  for (Index i = 0; i < k; ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    const double s = std::clamp(sines[i], 0.0, 1.0);
    out.angles[i] = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
  }
  std::sort(out.angles.data(), out.angles.data() + k);
  return out;
}

PrincipalAngles principal_angles_truncated(const Matrix& o1, const Matrix& o2, double rank_tol) {
  if (o1.rows() != o2.rows() || o1.cols() != o2.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "principal_angles_truncated: shapes differ");
  }
  return principal_angles_from_bases(orthonormal_basis(o1, rank_tol), orthonormal_basis(o2, rank_tol));
}

namespace {

double gram_condition(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  if (!(ev[0] > 0.0)) return std::numeric_limits<double>::infinity();
  return ev[ev.size() - 1] / ev[0];
}

}  // namespace

namespace {

// Basis change x -> L^T x with G = L L^T, so the new self-Gram is close to I.
DenseSSM whiten(const DenseSSM& s, const Eigen::LLT<Matrix>& llt) {
  const auto l = llt.matrixL();
  const Matrix lt = l.transpose();
  const Matrix a = l.solve((lt * s.a()).transpose()).transpose();
  const Matrix c = l.solve(s.c().transpose()).transpose();
  return DenseSSM(a, lt * s.b(), c);
}

Eigen::LLT<Matrix> cholesky(const Matrix& g) {
  Eigen::LLT<Matrix> llt(0.5 * (g + g.transpose()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::IllConditionedGram, "chordal_distance_sq: Gram is not positive definite");
  }
  return llt;
}

}  // namespace

SubspaceDistance chordal_distance_sq(const AnySSM& s1, const AnySSM& s2, double condition_limit) {
  const Index n = state_dim(s1);
  if (state_dim(s2) != n) throw Error(ErrorCode::DimensionMismatch, "chordal_distance_sq: state dimensions differ");
  if (!is_schur_stable(s1) || !is_schur_stable(s2)) {
    throw Error(ErrorCode::NonFinite, "chordal_distance_sq: observability Gram diverges for unstable A");
  }

  AnySSM w1 = s1;
  AnySSM w2 = s2;
  Matrix g1 = gram(w1, w1).g;
  Matrix g2 = gram(w2, w2).g;
  for (const Matrix* g : {&g1, &g2}) {
    const double cond = gram_condition(*g);
    if (!(cond <= condition_limit)) {
      throw Error(ErrorCode::IllConditionedGram,
                  "chordal_distance_sq: Gram condition " + std::to_string(cond) + " exceeds limit");
    }
  }

  // The trace below loses about eps * cond(G) to cancellation, so poorly
  // conditioned Grams are first whitened and recomputed in the new basis.
  constexpr double kWhitenAbove = 1e3;
  auto refine = [](AnySSM& w, Matrix& g) {
    if (gram_condition(g) <= kWhitenAbove) return;
    for (int pass = 0; pass < 2; ++pass) {
      w = whiten(as_dense(w), cholesky(g));
      g = gram(w, w).g;
    }
  };
  refine(w1, g1);
  refine(w2, g2);
  const Matrix g3 = gram(w1, w2).g;

  // Tr(G1^-1 G3 G2^-1 G3^T) = ||L1^-1 G3 L2^-T||_F^2 with G = L L^T.
  const Eigen::LLT<Matrix> l1 = cholesky(g1);
  const Eigen::LLT<Matrix> l2 = cholesky(g2);
  const Matrix left = l1.matrixL().solve(g3);
  const Matrix both = l2.matrixL().solve(left.transpose());
  const double overlap = both.squaredNorm();
  const double two_n = 2.0 * static_cast<double>(n);
  return {std::clamp(two_n - 2.0 * overlap, 0.0, two_n), Metric::Chordal};
}

double simplified_cos_sq(const DiagonalSSM& s1, const DiagonalSSM& s2, double eps) {
  if (s1.n() != s2.n()) throw Error(ErrorCode::DimensionMismatch, "simplified distance: state dimensions differ");
  if ((s1.a_diag() - s2.a_diag()).cwiseAbs().maxCoeff() <= eps &&
      (s1.c() - s2.c()).cwiseAbs().maxCoeff() <= eps) {
    return 1.0;
  }
  const double trace1 = gram_diagonal(s1.a_diag(), s1.c(), s1.a_diag(), s1.c()).g.trace();
  const double trace2 = gram_diagonal(s2.a_diag(), s2.c(), s2.a_diag(), s2.c()).g.trace();
  if (!(trace1 >= 1e-300) || !(trace2 >= 1e-300)) {
    throw Error(ErrorCode::DegenerateTrace, "simplified distance: self-Gram trace underflow");
  }
  // Tr(G3 G4) with G4 = G3^T is ||G3||_F^2.
  const double cross = gram_diagonal(s1.a_diag(), s1.c(), s2.a_diag(), s2.c()).g.squaredNorm();
  return std::clamp(cross / (trace1 * trace2), 0.0, 1.0);
}

SubspaceDistance simplified_distance(const DiagonalSSM& s1, const DiagonalSSM& s2, double eps) {
  return {1.0 - simplified_cos_sq(s1, s2, eps), Metric::Simplified};
}

SubspaceDistance classical_distance(const PrincipalAngles& pa, Metric metric) {
  const Vector& theta = pa.angles;
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  for (Index i = 0; i < theta.size(); ++i) {
    if (!(theta[i] >= 0.0 && theta[i] <= kHalfPi + 1e-12)) {
      throw Error(ErrorCode::DimensionMismatch, "classical_distance: angle outside [0, pi/2]");
    }
  }
  // sum_i log cos(theta_i), via log1p(-2 sin^2(theta/2)) to keep small angles exact.
  auto sum_log_cos = [&] {
    double acc = 0.0;
    for (Index i = 0; i < theta.size(); ++i) {
      const double h = std::sin(0.5 * theta[i]);
      acc += std::log1p(-2.0 * h * h);
    }
    return acc;
  };

  switch (metric) {
    case Metric::Chordal: {
      double acc = 0.0;
      for (Index i = 0; i < theta.size(); ++i) acc += std::sin(theta[i]) * std::sin(theta[i]);
      return {std::sqrt(acc), metric};
    }
    case Metric::Geodesic:
      return {theta.norm(), metric};
    case Metric::BinetCauchy: {
      const double one_minus = -std::expm1(2.0 * sum_log_cos());
      return {std::sqrt(std::clamp(one_minus, 0.0, 1.0)), metric};
    }
    case Metric::FubiniStudy: {
      // acos(p) = 2 asin(sqrt((1 - p) / 2)), p = prod cos(theta_i)
      const double one_minus = -std::expm1(sum_log_cos());
      return {2.0 * std::asin(std::sqrt(std::clamp(0.5 * one_minus, 0.0, 1.0))), metric};
    }
    case Metric::Martin: {
      for (Index i = 0; i < theta.size(); ++i) {
        if (!(std::cos(theta[i]) > 0.0) || theta[i] >= kHalfPi) {
          throw Error(ErrorCode::InfiniteDistance, "classical_distance: martin distance is infinite at pi/2");
        }
      }
      return {std::sqrt(std::max(0.0, -2.0 * sum_log_cos())), metric};
    }
    case Metric::Simplified:
      break;
  }
  throw Error(ErrorCode::UnknownSolver, "classical_distance: simplified distance needs SSM inputs");
}

}  // namespace obsgrass
