#pragma once

#include "obsgrass/ssm.hpp"

#include <cstdint>
#include <vector>

namespace obsgrass {

/// Parameters of one selective diagonal SSM layer acting on o channels with
/// an n-dimensional state per channel:
///   delta[t,i] = softplus(w_delta[i] x[t,i] + b_delta[i])
///   A[i,:]     = -exp(a_log[i,:])
///   A_bar      = exp(delta A),  B_bar = (A_bar - 1) / A * b     (ZOH)
///   C[t]       = w_c x[t] + c_bias
///   h[t,i]     = A_bar[t,i] . h[t-1,i] + B_bar[t,i] x[t,i]
///   out[t,i]   = x[t,i] + C[t] . h[t,i]
struct SelectiveLayer {
  Matrix a_log;    // o x n
  Matrix b;        // o x n
  Matrix w_c;      // n x o
  Vector c_bias;   // n
  Vector w_delta;  // o
  Vector b_delta;  // o

  Index channels() const noexcept { return a_log.rows(); }
  Index state_dim() const noexcept { return a_log.cols(); }
};

struct LinearHead {
  Matrix w;     // classes x o
  Vector bias;  // classes
};

struct ModelConfig {
  Index state_dim = 8;
  Index layers = 1;

  void validate() const;
};

/// Stack of selective SSM layers, mean-pooled over time into a linear head.
struct Classifier {
  std::vector<SelectiveLayer> layers;
  LinearHead head;

  Index channels() const noexcept { return layers.front().channels(); }
  Index classes() const noexcept { return head.w.rows(); }
};

Classifier init_classifier(Index channels, Index classes, const ModelConfig& config, std::uint64_t seed);

/// Everything the backward pass needs for one layer and one sequence.
struct LayerCache {
  Matrix input;                 // tau x o
  Matrix z_delta;               // tau x o, pre-softplus
  Matrix delta;                 // tau x o
  SequenceStateBundle states;   // a_bar, b_bar (tau slices of o x n), c (tau x n)
  std::vector<Matrix> hidden;   // tau slices of o x n
  Matrix ssm_out;               // tau x o, C[t] . h[t,i] before the residual
  Matrix output;                // tau x o
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Vector pooled;  // o
  Vector logits;  // classes
};

ForwardCache forward(const Classifier& model, const Matrix& x);

/// Upstream gradients for one sequence. Per-layer entries may be empty
/// (treated as zero).
struct LayerUpstream {
  Matrix d_a_tilde;  // tau x n
  Matrix d_b_tilde;  // tau x n
  Matrix d_c_tilde;  // tau x n
  Matrix d_ssm_out;  // tau x o
};

/// Gradient container with the same layout as Classifier.
struct ClassifierGrad {
  std::vector<SelectiveLayer> layers;
  LinearHead head;

  static ClassifierGrad zeros_like(const Classifier& model);
  void add_scaled(const ClassifierGrad& other, double scale);
};

/// Accumulates into `grad` the gradient of a loss whose sensitivity to the
/// logits is d_logits and to each layer's aggregated states / SSM outputs
/// is given in `upstream` (one entry per layer, may be empty vector).
void backward(const Classifier& model, const ForwardCache& cache, const Vector& d_logits,
              const std::vector<LayerUpstream>& upstream, ClassifierGrad& grad);

/// Aggregated (A~, B~, C~) of one layer's cache.
AggregatedStates layer_states(const LayerCache& cache);

/// Parameter vector view helpers for finite-difference tests and updates.
Index parameter_count(const Classifier& model);
Vector flatten(const Classifier& model);
void unflatten(const Vector& params, Classifier& model);
Vector flatten(const ClassifierGrad& grad);

}  // namespace obsgrass
