#include "obsgrass/loss.hpp"

#include "obsgrass/error.hpp"

#include <cmath>
#include <string>

namespace obsgrass {

std::string_view to_string(LossVariant variant) noexcept {
  switch (variant) {
    case LossVariant::None: return "none";
    case LossVariant::Ism: return "ism";
    case LossVariant::IsmPlus: return "ism_plus";
    case LossVariant::ParamMse: return "param_mse";
    case LossVariant::OutputMse: return "output_mse";
  }
  return "unknown";
}

std::optional<LossVariant> parse_loss_variant(std::string_view name) noexcept {
  if (name == "none" || name == "seq") return LossVariant::None;
  if (name == "ism") return LossVariant::Ism;
  if (name == "ism_plus") return LossVariant::IsmPlus;
  if (name == "param_mse") return LossVariant::ParamMse;
  if (name == "output_mse") return LossVariant::OutputMse;
  return std::nullopt;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::ConfigError, "loss.lambda must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::ConfigError, "loss.gamma must be >= 0");
  if (tau_outputs < 1) throw Error(ErrorCode::ConfigError, "loss.tau_outputs must be >= 1");
}

namespace {

void check_same_shape(const AggregatedStates& x, const AggregatedStates& y) {
  if (x.tau() != y.tau() || x.n() != y.n() || x.c_tilde.rows() != y.c_tilde.rows() ||
      x.c_tilde.cols() != y.c_tilde.cols() || x.b_tilde.rows() != y.b_tilde.rows() ||
      x.b_tilde.cols() != y.b_tilde.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "aggregated states differ in shape");
  }
  if (x.tau() < 1 || x.n() < 1) throw Error(ErrorCode::DimensionMismatch, "aggregated states are empty");
}

}  // namespace

IsmLoss ism_loss(const AggregatedStates& old_states, const AggregatedStates& new_states, SliceDistance distance) {
  check_same_shape(old_states, new_states);
  const Index steps = old_states.tau();
  IsmLoss out{0.0, Vector(steps)};
  for (Index t = 0; t < steps; ++t) {
    const DiagonalSSM before = old_states.slice(t);
    const DiagonalSSM after = new_states.slice(t);
    out.per_slice[t] = distance == SliceDistance::Simplified ? simplified_distance(before, after).value
                                                             : chordal_distance_sq(before, after).value;
  }
  out.value = out.per_slice.mean();
  return out;
}

double ism_plus_loss(const AggregatedStates& old_states, const AggregatedStates& new_states, double gamma) {
  const double ism = ism_loss(old_states, new_states).value;
  const double b_term = (old_states.b_tilde - new_states.b_tilde).squaredNorm() / static_cast<double>(old_states.tau());
  return ism + gamma * b_term;
}

double baseline_param_mse(const ParamTriple& old_params, const ParamTriple& new_params) {
  auto same = [](const Matrix& x, const Matrix& y) { return x.rows() == y.rows() && x.cols() == y.cols(); };
  if (!same(old_params.a, new_params.a) || !same(old_params.b, new_params.b) || !same(old_params.c, new_params.c)) {
    throw Error(ErrorCode::DimensionMismatch, "baseline_param_mse: parameter shapes differ");
  }
  return (old_params.a - new_params.a).squaredNorm() + (old_params.b - new_params.b).squaredNorm() +
         (old_params.c - new_params.c).squaredNorm();
}

double baseline_output_mse(const DiagonalSSM& old_ssm, const DiagonalSSM& new_ssm, const Vector& inputs) {
  if (old_ssm.n() != new_ssm.n()) throw Error(ErrorCode::DimensionMismatch, "baseline_output_mse: n differs");
  const Vector h0 = Vector::Zero(old_ssm.n());
  const Vector y_old = simulate(old_ssm, inputs, h0).outputs;
  const Vector y_new = simulate(new_ssm, inputs, h0).outputs;
  return (y_new - y_old).squaredNorm();
}

LossValue total_loss(double cls, double reg, const LossConfig& config, Vector per_slice) {
  return {cls + config.lambda * reg, cls, reg, std::move(per_slice)};
}

StateGradient ism_gradient(const AggregatedStates& old_states, const AggregatedStates& new_states) {
  check_same_shape(old_states, new_states);
  const Index steps = old_states.tau();
  const Index n = old_states.n();
  const double inv_tau = 1.0 / static_cast<double>(steps);
  StateGradient grad{Matrix::Zero(steps, n), Matrix::Zero(steps, n), Matrix::Zero(steps, n)};

  for (Index t = 0; t < steps; ++t) {
    const auto a0 = old_states.a_tilde.row(t);
    const auto c0 = old_states.c_tilde.row(t);
    const auto a = new_states.a_tilde.row(t);
    const auto c = new_states.c_tilde.row(t);

    // cos^2 = cross / (self_old * self_new)
    double self_old = 0.0;
    double self_new = 0.0;
    for (Index i = 0; i < n; ++i) {
      self_old += c0[i] * c0[i] / (1.0 - a0[i] * a0[i]);
      self_new += c[i] * c[i] / (1.0 - a[i] * a[i]);
    }
    if (!(self_old >= 1e-300) || !(self_new >= 1e-300)) {
      throw Error(ErrorCode::DegenerateTrace, "ism_gradient: self-Gram trace underflow");
    }

    double cross = 0.0;
    for (Index j = 0; j < n; ++j) {
      double d_cross_dc = 0.0;
      double d_cross_da = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double den = 1.0 - a0[i] * a[j];
        const double w = c0[i] * c0[i] / (den * den);
        cross += w * c[j] * c[j];
        d_cross_dc += 2.0 * w * c[j];
        d_cross_da += 2.0 * w * c[j] * c[j] * a0[i] / den;
      }
      grad.d_c_tilde(t, j) = d_cross_dc;
      grad.d_a_tilde(t, j) = d_cross_da;
    }

    // d(1 - cross / (S0 S)) = -(dcross * S - cross * dS) / (S0 S^2)
    const double scale = -inv_tau / (self_old * self_new * self_new);
    for (Index j = 0; j < n; ++j) {
      const double q = 1.0 - a[j] * a[j];
      const double d_self_dc = 2.0 * c[j] / q;
      const double d_self_da = 2.0 * c[j] * c[j] * a[j] / (q * q);
      grad.d_c_tilde(t, j) = scale * (grad.d_c_tilde(t, j) * self_new - cross * d_self_dc);
      grad.d_a_tilde(t, j) = scale * (grad.d_a_tilde(t, j) * self_new - cross * d_self_da);
    }
  }
  return grad;
}

StateGradient ism_plus_gradient(const AggregatedStates& old_states, const AggregatedStates& new_states,
                                double gamma) {
  StateGradient grad = ism_gradient(old_states, new_states);
  grad.d_b_tilde = (2.0 * gamma / static_cast<double>(old_states.tau())) * (new_states.b_tilde - old_states.b_tilde);
  return grad;
}

}  // namespace obsgrass
