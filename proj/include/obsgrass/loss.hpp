#pragma once

#include "obsgrass/grassmann.hpp"
#include "obsgrass/ssm.hpp"

#include <optional>
#include <string_view>

namespace obsgrass {

enum class LossVariant { None, Ism, IsmPlus, ParamMse, OutputMse };

std::string_view to_string(LossVariant variant) noexcept;
std::optional<LossVariant> parse_loss_variant(std::string_view name) noexcept;

struct LossConfig {
  LossVariant variant = LossVariant::None;
  double lambda = 0.0;
  double gamma = 0.0;
  Index tau_outputs = 1;

  /// Throws ConfigError for negative weights or tau_outputs < 1.
  void validate() const;
};

struct LossValue {
  double total = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  Vector per_slice;
};

/// Which subspace distance is evaluated on each time slice.
enum class SliceDistance { Simplified, Chordal };

struct IsmLoss {
  double value = 0.0;
  Vector per_slice;
};

/// Mean over time slices of the distance between the old and new
/// (A~_t, C~_t) observability subspaces.
IsmLoss ism_loss(const AggregatedStates& old_states, const AggregatedStates& new_states,
                 SliceDistance distance = SliceDistance::Simplified);

/// ism_loss + gamma * mean_t ||B~_old[t] - B~_new[t]||^2.
double ism_plus_loss(const AggregatedStates& old_states, const AggregatedStates& new_states, double gamma);

struct ParamTriple {
  Matrix a;
  Matrix b;
  Matrix c;
};

/// ||dA||_F^2 + ||dB||_F^2 + ||dC||_F^2.
double baseline_param_mse(const ParamTriple& old_params, const ParamTriple& new_params);

/// sum_t (y_new(t) - y_old(t))^2 with both systems started from h0 = 0.
double baseline_output_mse(const DiagonalSSM& old_ssm, const DiagonalSSM& new_ssm, const Vector& inputs);

/// total = cls + lambda * reg.
LossValue total_loss(double cls, double reg, const LossConfig& config, Vector per_slice = {});

/// Partial derivatives of ism_loss (simplified distance) with respect to the
/// new model's aggregated states. The old states are constants. The
/// equality guard is not differentiated: on guarded slices the result is the
/// gradient of the unguarded rank-1 expression.
struct StateGradient {
  Matrix d_a_tilde;
  Matrix d_b_tilde;
  Matrix d_c_tilde;
};

StateGradient ism_gradient(const AggregatedStates& old_states, const AggregatedStates& new_states);

/// Gradient of ism_plus_loss; d_b_tilde carries the B~ penalty.
StateGradient ism_plus_gradient(const AggregatedStates& old_states, const AggregatedStates& new_states,
                                double gamma);

}  // namespace obsgrass
