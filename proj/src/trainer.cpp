#include "obsgrass/trainer.hpp"

#include "obsgrass/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace obsgrass {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::ConfigError, "optimizer.learning_rate must be > 0");
  }
  if (epochs < 1) throw Error(ErrorCode::ConfigError, "optimizer.epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::ConfigError, "optimizer.batch_size must be >= 1");
}

std::string_view to_string(RegLayers which) noexcept {
  switch (which) {
    case RegLayers::Last: return "last";
    case RegLayers::LastHalf: return "last_half";
    case RegLayers::All: return "all";
  }
  return "unknown";
}

std::optional<RegLayers> parse_reg_layers(std::string_view name) noexcept {
  if (name == "last") return RegLayers::Last;
  if (name == "last_half") return RegLayers::LastHalf;
  if (name == "all") return RegLayers::All;
  return std::nullopt;
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  optimizer.validate();
}

const std::vector<Sample>& TaskDataSource::train(int task) {
  log_.push_back({phase_, task, Split::Train});
  return stream_->tasks.at(static_cast<std::size_t>(task)).train;
}

const std::vector<Sample>& TaskDataSource::test(int task) {
  log_.push_back({phase_, task, Split::Test});
  return stream_->tasks.at(static_cast<std::size_t>(task)).test;
}

bool exemplar_free(const std::vector<DataAccess>& log) {
  return std::all_of(log.begin(), log.end(), [](const DataAccess& a) {
    return a.phase_task < 0 || (a.accessed_task == a.phase_task && a.split == Split::Train);
  });
}

std::vector<std::size_t> regularized_layers(Index layers, RegLayers which) {
  const auto total = static_cast<std::size_t>(layers);
  std::size_t first = 0;
  switch (which) {
    case RegLayers::Last: first = total - 1; break;
    case RegLayers::LastHalf: first = total / 2; break;
    case RegLayers::All: first = 0; break;
  }
  std::vector<std::size_t> out(total - first);
  std::iota(out.begin(), out.end(), first);
  return out;
}

namespace {

ParamTriple triple(const AggregatedStates& s) { return {s.a_tilde, s.b_tilde, s.c_tilde}; }

// Regularizer value for one sample and one layer; fills the upstream
// gradient (unscaled) when `up` is non-null.
double layer_regularizer(const LayerCache& old_layer, const LayerCache& new_layer, const LossConfig& loss,
                         LayerUpstream* up) {
  switch (loss.variant) {
    case LossVariant::None:
      return 0.0;
    case LossVariant::Ism:
    case LossVariant::IsmPlus: {
      const AggregatedStates before = layer_states(old_layer);
      const AggregatedStates after = layer_states(new_layer);
      const double gamma = loss.variant == LossVariant::IsmPlus ? loss.gamma : 0.0;
      if (up != nullptr) {
        StateGradient g = ism_plus_gradient(before, after, gamma);
        up->d_a_tilde = std::move(g.d_a_tilde);
        up->d_c_tilde = std::move(g.d_c_tilde);
        if (gamma > 0.0) up->d_b_tilde = std::move(g.d_b_tilde);
      }
      return loss.variant == LossVariant::IsmPlus ? ism_plus_loss(before, after, gamma) : ism_loss(before, after).value;
    }
    case LossVariant::ParamMse: {
      const AggregatedStates before = layer_states(old_layer);
      const AggregatedStates after = layer_states(new_layer);
      if (up != nullptr) {
        up->d_a_tilde = 2.0 * (after.a_tilde - before.a_tilde);
        up->d_b_tilde = 2.0 * (after.b_tilde - before.b_tilde);
        up->d_c_tilde = 2.0 * (after.c_tilde - before.c_tilde);
      }
      return baseline_param_mse(triple(before), triple(after));
    }
    case LossVariant::OutputMse: {
      const Index steps = std::min<Index>(loss.tau_outputs, new_layer.ssm_out.rows());
      const Matrix diff = new_layer.ssm_out.topRows(steps) - old_layer.ssm_out.topRows(steps);
      if (up != nullptr) {
        up->d_ssm_out = Matrix::Zero(new_layer.ssm_out.rows(), new_layer.ssm_out.cols());
        up->d_ssm_out.topRows(steps) = 2.0 * diff;
      }
      return diff.squaredNorm();
    }
  }
  return 0.0;
}

}  // namespace

LossValue batch_objective(const Classifier& model, const Classifier* old_model, std::span<const Sample* const> batch,
                          int seen_classes, const TrainConfig& config, ClassifierGrad* grad) {
  if (batch.empty()) throw Error(ErrorCode::ConfigError, "batch_objective: empty batch");
  if (seen_classes < 1 || seen_classes > model.classes()) {
    throw Error(ErrorCode::ConfigError, "batch_objective: seen_classes out of range");
  }
  const bool regularize =
      old_model != nullptr && config.loss.variant != LossVariant::None && config.loss.lambda > 0.0;
  const auto reg_layers = regularized_layers(static_cast<Index>(model.layers.size()), config.reg_layers);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  double cls_sum = 0.0;
  double reg_sum = 0.0;
  for (const Sample* sample : batch) {
    const ForwardCache cache = forward(model, sample->x);

    // Softmax cross-entropy over the seen classes; unseen logits are masked.
    const Vector seen = cache.logits.head(seen_classes);
    const double shift = seen.maxCoeff();
    const Vector expo = (seen.array() - shift).exp().matrix();
    const double norm = expo.sum();
    cls_sum += -(seen[sample->label] - shift - std::log(norm));

    std::vector<LayerUpstream> upstream;
    if (regularize) {
      const ForwardCache old_cache = forward(*old_model, sample->x);
      upstream.resize(model.layers.size());
      for (std::size_t l : reg_layers) {
        reg_sum += layer_regularizer(old_cache.layers[l], cache.layers[l], config.loss,
                                     grad != nullptr ? &upstream[l] : nullptr);
      }
      // Scale the state gradients to d(lambda * mean reg) / d states.
      const double s = config.loss.lambda * inv_batch;
      for (auto& up : upstream) {
        for (Matrix* m : {&up.d_a_tilde, &up.d_b_tilde, &up.d_c_tilde, &up.d_ssm_out}) {
          if (m->size() > 0) *m *= s;
        }
      }
    }

    if (grad != nullptr) {
      Vector d_logits = Vector::Zero(model.classes());
      d_logits.head(seen_classes) = expo / norm;
      d_logits[sample->label] -= 1.0;
      d_logits *= inv_batch;
      backward(model, cache, d_logits, upstream, *grad);
    }
  }
  const double cls = cls_sum * inv_batch;
  const double reg = reg_sum * inv_batch;
  return total_loss(cls, reg, config.loss);
}

double accuracy(const Classifier& model, const std::vector<Sample>& samples, int seen_classes) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Sample& s : samples) {
    const Vector logits = forward(model, s.x).logits.head(seen_classes);
    Index best = 0;
    logits.maxCoeff(&best);
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainResult train_sequential(const TaskStream& stream, const TrainConfig& config) {
  config.validate();
  if (stream.num_tasks() < 1) throw Error(ErrorCode::ConfigError, "train_sequential: empty stream");

  TaskDataSource source(stream);
  Classifier model = init_classifier(stream.n_features, stream.total_classes(), config.model, config.seed);
  TrainResult result{TaskAccuracyMatrix(stream.num_tasks()), {}, {}, {}};
  std::mt19937_64 shuffler(config.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int task = 0; task < stream.num_tasks(); ++task) {
    const int seen = (task + 1) * stream.classes_per_task;
    const Classifier* old_model = task > 0 ? &result.checkpoints.back() : nullptr;

    source.begin_training(task);
    const std::vector<Sample>& train = source.train(task);
    std::vector<const Sample*> order(train.size());
    std::transform(train.begin(), train.end(), order.begin(), [](const Sample& s) { return &s; });

    double epoch_loss = 0.0;
    const int epochs = config.optimizer.epochs;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      double lr = config.optimizer.learning_rate;
      if (config.optimizer.cosine_decay) {
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / static_cast<double>(epochs)));
      }
      std::shuffle(order.begin(), order.end(), shuffler);
      epoch_loss = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.optimizer.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.optimizer.batch_size));
        ClassifierGrad grad = ClassifierGrad::zeros_like(model);
        const LossValue loss = batch_objective(
            model, old_model, std::span<const Sample* const>(order.data() + start, stop - start), seen, config, &grad);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
          SelectiveLayer& p = model.layers[l];
          const SelectiveLayer& g = grad.layers[l];
          p.a_log -= lr * g.a_log;
          p.b -= lr * g.b;
          p.w_c -= lr * g.w_c;
          p.c_bias -= lr * g.c_bias;
          p.w_delta -= lr * g.w_delta;
          p.b_delta -= lr * g.b_delta;
        }
        model.head.w -= lr * grad.head.w;
        model.head.bias -= lr * grad.head.bias;
        epoch_loss += loss.total;
        ++batches;
      }
      epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));
    }
    source.end_training();
    result.final_epoch_loss.push_back(epoch_loss);
    result.checkpoints.push_back(model);

    for (int j = 0; j <= task; ++j) {
      result.accuracy.set(task, j, accuracy(model, source.test(j), seen));
    }
  }
  result.access_log = source.log();
  return result;
}

std::array<CKDReport, 3> ckd_state_drift(const std::vector<Classifier>& checkpoints,
                                         const std::vector<Matrix>& probe_inputs) {
  if (checkpoints.size() < 2) throw Error(ErrorCode::InsufficientTasks, "ckd_state_drift: need >= 2 checkpoints");
  if (probe_inputs.size() < 2) throw Error(ErrorCode::DimensionMismatch, "ckd_state_drift: need >= 2 probes");
  const auto num_layers = checkpoints.front().layers.size();
  const auto num_ckpt = checkpoints.size();

  // features[state][checkpoint][layer]: probes x (tau * n)
  std::array<std::vector<std::vector<Matrix>>, 3> features;
  for (auto& f : features) f.assign(num_ckpt, std::vector<Matrix>(num_layers));
  for (std::size_t k = 0; k < num_ckpt; ++k) {
    for (std::size_t p = 0; p < probe_inputs.size(); ++p) {
      const ForwardCache cache = forward(checkpoints[k], probe_inputs[p]);
      for (std::size_t l = 0; l < num_layers; ++l) {
        const AggregatedStates s = layer_states(cache.layers[l]);
        const std::array<const Matrix*, 3> mats{&s.a_tilde, &s.b_tilde, &s.c_tilde};
        for (std::size_t which = 0; which < 3; ++which) {
          Matrix& w = features[which][k][l];
          const Matrix& m = *mats[which];
          if (w.size() == 0) w.resize(static_cast<Index>(probe_inputs.size()), m.size());
          // Row-major flatten of tau x n.
          const Matrix mt = m.transpose();
          w.row(static_cast<Index>(p)) = Eigen::Map<const RowVector>(mt.data(), mt.size());
        }
      }
    }
  }

  std::array<CKDReport, 3> out{CKDReport{'A', {}}, CKDReport{'B', {}}, CKDReport{'C', {}}};
  for (std::size_t which = 0; which < 3; ++which) {
    out[which].per_layer = Matrix::Zero(static_cast<Index>(num_layers), static_cast<Index>(num_ckpt));
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (std::size_t k = 1; k < num_ckpt; ++k) {
        out[which].per_layer(static_cast<Index>(l), static_cast<Index>(k)) =
            ckd(features[which][k][l], features[which][0][l]);
      }
    }
  }
  return out;
}

}  // namespace obsgrass
