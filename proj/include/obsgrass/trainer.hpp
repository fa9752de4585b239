#pragma once

#include "obsgrass/loss.hpp"
#include "obsgrass/metrics.hpp"
#include "obsgrass/model.hpp"
#include "obsgrass/task_stream.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace obsgrass {

struct OptimizerConfig {
  double learning_rate = 0.02;
  int epochs = 20;
  int batch_size = 32;
  bool cosine_decay = false;

  void validate() const;
};

/// Which SSM layers the regularizer sees.
enum class RegLayers { Last, LastHalf, All };

std::string_view to_string(RegLayers which) noexcept;
std::optional<RegLayers> parse_reg_layers(std::string_view name) noexcept;

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optimizer;
  RegLayers reg_layers = RegLayers::All;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Split { Train, Test };

struct DataAccess {
  int phase_task = -1;  // task being trained, -1 during evaluation/analysis
  int accessed_task = 0;
  Split split = Split::Train;
};

/// Read-only view of a TaskStream that records every split read, so the
/// exemplar-free contract can be audited after a run.
class TaskDataSource {
 public:
  explicit TaskDataSource(const TaskStream& stream) : stream_(&stream) {}

  void begin_training(int task) noexcept { phase_ = task; }
  void end_training() noexcept { phase_ = -1; }

  const std::vector<Sample>& train(int task);
  const std::vector<Sample>& test(int task);

  const std::vector<DataAccess>& log() const noexcept { return log_; }
  const TaskStream& stream() const noexcept { return *stream_; }

 private:
  const TaskStream* stream_;
  int phase_ = -1;
  std::vector<DataAccess> log_;
};

/// True when no training phase read another task's train or test split.
bool exemplar_free(const std::vector<DataAccess>& log);

/// Regularized layer indices for a model with `layers` layers.
std::vector<std::size_t> regularized_layers(Index layers, RegLayers which);

/// Loss of one mini-batch: softmax cross-entropy over the first
/// `seen_classes` logits plus lambda * reg against the frozen `old_model`
/// (ignored when null or lambda = 0). Accumulates the batch-mean gradient
/// into `grad` when non-null.
LossValue batch_objective(const Classifier& model, const Classifier* old_model, std::span<const Sample* const> batch,
                          int seen_classes, const TrainConfig& config, ClassifierGrad* grad);

/// Fraction of samples whose argmax over the first `seen_classes` logits
/// equals the label.
double accuracy(const Classifier& model, const std::vector<Sample>& samples, int seen_classes);

struct TrainResult {
  TaskAccuracyMatrix accuracy;
  std::vector<Classifier> checkpoints;  // one per task, after training it
  std::vector<double> final_epoch_loss;
  std::vector<DataAccess> access_log;
};

/// Sequential exemplar-free class-incremental training. For each task the
/// previous checkpoint is frozen and used only to extract reference states
/// on the current task's inputs.
TrainResult train_sequential(const TaskStream& stream, const TrainConfig& config);

struct CKDReport {
  char state = 'A';
  Matrix per_layer;  // layers x checkpoints, CKD against checkpoint 0
};

/// Runs probe inputs through every checkpoint, stacks each layer's
/// aggregated A~ / B~ / C~ (flattened over time) per probe, and reports CKD
/// against the first checkpoint.
std::array<CKDReport, 3> ckd_state_drift(const std::vector<Classifier>& checkpoints,
                                         const std::vector<Matrix>& probe_inputs);

}  // namespace obsgrass
