#include "obsgrass/error.hpp"
#include "obsgrass/grassmann.hpp"
#include "obsgrass/loss.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace obsgrass;
using namespace testing;

namespace {

AggregatedStates random_states(std::mt19937_64& rng, Index tau, Index n) {
  auto draw = [&] { return Matrix(normal_matrix(rng, tau, n).array().tanh()); };
  AggregatedStates s;
  s.a_tilde = draw();
  s.b_tilde = draw();
  s.c_tilde = draw();
  return s;
}

// Unguarded rank-1 quotient, written out directly for finite differences.
double ism_unguarded(const AggregatedStates& old_s, const AggregatedStates& new_s) {
  double total = 0.0;
  for (Index t = 0; t < old_s.tau(); ++t) {
    double g1 = 0.0;
    double g2 = 0.0;
    double cross = 0.0;
    for (Index i = 0; i < old_s.n(); ++i) {
      const double a0 = old_s.a_tilde(t, i);
      const double c0 = old_s.c_tilde(t, i);
      const double a = new_s.a_tilde(t, i);
      const double c = new_s.c_tilde(t, i);
      g1 += c0 * c0 / (1.0 - a0 * a0);
      g2 += c * c / (1.0 - a * a);
      for (Index j = 0; j < old_s.n(); ++j) {
        const double g3 = c0 * new_s.c_tilde(t, j) / (1.0 - a0 * new_s.a_tilde(t, j));
        cross += g3 * g3;
      }
    }
    total += 1.0 - cross / (g1 * g2);
  }
  return total / static_cast<double>(old_s.tau());
}

double gradient_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("variant names") {
  for (LossVariant v : {LossVariant::None, LossVariant::Ism, LossVariant::IsmPlus, LossVariant::ParamMse,
                        LossVariant::OutputMse}) {
    CHECK(parse_loss_variant(to_string(v)) == v);
  }
  CHECK(parse_loss_variant("seq") == LossVariant::None);
  CHECK_FALSE(parse_loss_variant("ewc").has_value());
}

TEST_CASE("config validation") {
  LossConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.lambda = 1.0;
  cfg.tau_outputs = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("ism loss examples") {
  std::mt19937_64 rng(31);
  const AggregatedStates s = random_states(rng, 5, 4);
  CHECK(ism_loss(s, s).value == 0.0);

  AggregatedStates one;
  one.a_tilde = Matrix::Constant(1, 1, 0.5);
  one.b_tilde = Matrix::Constant(1, 1, 0.1);
  one.c_tilde = Matrix::Constant(1, 1, 1.0);
  AggregatedStates flipped = one;
  CHECK(ism_loss(one, flipped).value == 0.0);
  flipped.c_tilde(0, 0) = -1.0;
  CHECK(std::abs(ism_loss(one, flipped).value) < 1e-15);

  const AggregatedStates x = random_states(rng, 2, 2);
  const AggregatedStates y = random_states(rng, 2, 2);
  const double d0 = simplified_distance(x.slice(0), y.slice(0)).value;
  const double d1 = simplified_distance(x.slice(1), y.slice(1)).value;
  const IsmLoss l = ism_loss(x, y);
  CHECK(std::abs(l.value - 0.5 * (d0 + d1)) < 1e-15);
  CHECK(l.per_slice.size() == 2);
  CHECK(std::abs(l.value - ism_unguarded(x, y)) < 1e-12);

  CHECK_THROWS_AS(ism_loss(x, random_states(rng, 3, 2)), Error);
}

TEST_CASE("ism loss with chordal slices") {
  std::mt19937_64 rng(32);
  const AggregatedStates x = random_states(rng, 3, 3);
  const AggregatedStates y = random_states(rng, 3, 3);
  const IsmLoss l = ism_loss(x, y, SliceDistance::Chordal);
  double want = 0.0;
  for (Index t = 0; t < 3; ++t) want += chordal_distance_sq(x.slice(t), y.slice(t)).value / 3.0;
  CHECK(std::abs(l.value - want) < 1e-14);
}

TEST_CASE("ism plus") {
  std::mt19937_64 rng(33);
  const AggregatedStates x = random_states(rng, 3, 4);
  const AggregatedStates y = random_states(rng, 3, 4);
  CHECK(ism_plus_loss(x, x, 2.0) == 0.0);
  CHECK(ism_plus_loss(x, y, 0.0) == ism_loss(x, y).value);

  AggregatedStates b = random_states(rng, 1, 4);
  AggregatedStates shifted = b;
  shifted.b_tilde.array() += 0.1;
  CHECK(ism_plus_loss(b, shifted, 1.0) == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("parameter baseline") {
  std::mt19937_64 rng(34);
  const ParamTriple p{normal_matrix(rng, 3, 3), normal_matrix(rng, 3, 1), normal_matrix(rng, 1, 3)};
  CHECK(baseline_param_mse(p, p) == 0.0);
  ParamTriple q = p;
  q.c(0, 0) += 1.0;
  CHECK(baseline_param_mse(p, q) == doctest::Approx(1.0).epsilon(1e-14));
  const ParamTriple r{normal_matrix(rng, 3, 3), normal_matrix(rng, 3, 1), normal_matrix(rng, 1, 3)};
  double want = 0.0;
  for (const auto& [m1, m2] : {std::pair{&p.a, &r.a}, std::pair{&p.b, &r.b}, std::pair{&p.c, &r.c}}) {
    for (Index i = 0; i < m1->rows(); ++i) {
      for (Index j = 0; j < m1->cols(); ++j) want += ((*m1)(i, j) - (*m2)(i, j)) * ((*m1)(i, j) - (*m2)(i, j));
    }
  }
  CHECK(baseline_param_mse(p, r) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("output baseline") {
  std::mt19937_64 rng(35);
  const DiagonalSSM s = random_diagonal(rng, 3);
  const Vector x = normal_vector(rng, 50);
  CHECK(baseline_output_mse(s, s, x) == 0.0);

  // A = 0, B = e1: y(t) = c1 x(t).
  Vector e1 = Vector::Zero(2);
  e1[0] = 1.0;
  const DiagonalSSM m1(Vector::Zero(2), e1, (RowVector(2) << 2.0, 0.7).finished());
  const DiagonalSSM m2(Vector::Zero(2), e1, (RowVector(2) << 0.5, -0.3).finished());
  const Vector xs = normal_vector(rng, 10);
  CHECK(baseline_output_mse(m1, m2, xs) == doctest::Approx(1.5 * 1.5 * xs.squaredNorm()).epsilon(1e-13));

  const DiagonalSSM s2 = random_diagonal(rng, 3);
  double want = 0.0;
  Vector h1 = Vector::Zero(3);
  Vector h2 = Vector::Zero(3);
  for (double u : x) {
    h1 = s.a_diag().cwiseProduct(h1) + s.b() * u;
    h2 = s2.a_diag().cwiseProduct(h2) + s2.b() * u;
    const double dy = s2.c().dot(h2) - s.c().dot(h1);
    want += dy * dy;
  }
  CHECK(baseline_output_mse(s, s2, x) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("total loss") {
  LossConfig cfg;
  cfg.variant = LossVariant::Ism;
  cfg.lambda = 0.0;
  CHECK(total_loss(1.3, 2.0, cfg).total == 1.3);
  cfg.lambda = 0.5;
  const LossValue v = total_loss(1.0, 2.0, cfg);
  CHECK(v.total == 2.0);
  CHECK(v.cls == 1.0);
  CHECK(v.reg == 2.0);
}

TEST_CASE("ism gradient scalar closed form") {
  const double a0 = 0.4;
  const double a = -0.2;
  AggregatedStates old_s;
  old_s.a_tilde = Matrix::Constant(1, 1, a0);
  old_s.b_tilde = Matrix::Zero(1, 1);
  old_s.c_tilde = Matrix::Constant(1, 1, 0.7);
  AggregatedStates new_s = old_s;
  new_s.a_tilde(0, 0) = a;
  new_s.c_tilde(0, 0) = -0.3;
  // cos^2 = (1 - a0^2)(1 - a^2) / (1 - a0 a)^2, independent of c.
  const double d_cos_da = 2.0 * (1.0 - a0 * a0) * (a0 - a) / std::pow(1.0 - a0 * a, 3);
  const StateGradient g = ism_gradient(old_s, new_s);
  CHECK(std::abs(g.d_a_tilde(0, 0) - (-d_cos_da)) < 1e-10);
  CHECK(std::abs(g.d_c_tilde(0, 0)) < 1e-10);
}

TEST_CASE("ism gradient matches finite differences") {
  std::mt19937_64 rng(36);
  const double h = 1e-6;
  auto check_bundle = [&](const AggregatedStates& old_s, const AggregatedStates& new_s, int coords) {
    const StateGradient g = ism_gradient(old_s, new_s);
    std::uniform_int_distribution<Index> pick_t(0, new_s.tau() - 1);
    std::uniform_int_distribution<Index> pick_i(0, new_s.n() - 1);
    for (int k = 0; k < coords; ++k) {
      const Index t = pick_t(rng);
      const Index i = pick_i(rng);
      const bool on_a = k % 2 == 0;
      AggregatedStates plus = new_s;
      AggregatedStates minus = new_s;
      (on_a ? plus.a_tilde : plus.c_tilde)(t, i) += h;
      (on_a ? minus.a_tilde : minus.c_tilde)(t, i) -= h;
      const double numeric = (ism_unguarded(old_s, plus) - ism_unguarded(old_s, minus)) / (2.0 * h);
      const double analytic = on_a ? g.d_a_tilde(t, i) : g.d_c_tilde(t, i);
      CHECK(gradient_rel_err(analytic, numeric) < 1e-4);
    }
  };
  const AggregatedStates old_s = random_states(rng, 4, 8);
  check_bundle(old_s, random_states(rng, 4, 8), 200);
  check_bundle(old_s, old_s, 50);
}

TEST_CASE("ism plus gradient") {
  std::mt19937_64 rng(37);
  const AggregatedStates x = random_states(rng, 3, 2);
  const AggregatedStates y = random_states(rng, 3, 2);
  const StateGradient g = ism_plus_gradient(x, y, 0.7);
  const double h = 1e-6;
  AggregatedStates plus = y;
  AggregatedStates minus = y;
  plus.b_tilde(1, 1) += h;
  minus.b_tilde(1, 1) -= h;
  const double numeric = (ism_plus_loss(x, plus, 0.7) - ism_plus_loss(x, minus, 0.7)) / (2.0 * h);
  CHECK(gradient_rel_err(g.d_b_tilde(1, 1), numeric) < 1e-6);
  CHECK((g.d_a_tilde - ism_gradient(x, y).d_a_tilde).norm() == 0.0);
}

}  // TEST_SUITE
