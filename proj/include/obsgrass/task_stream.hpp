#pragma once

#include "obsgrass/ssm.hpp"

#include <cstdint>
#include <vector>

namespace obsgrass {

/// One labelled sequence: tau x n_features.
struct Sample {
  Matrix x;
  int label = 0;
};

struct TaskData {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<int> classes;  // global labels owned by this task
};

struct StreamConfig {
  std::uint64_t seed = 0;
  int num_tasks = 3;
  int classes_per_task = 2;
  int samples_per_class = 200;
  Index tau = 16;
  Index n_features = 4;
  Index generator_order = 2;        // state size of each class's generating SSM
  double observation_noise = 0.1;
  double class_offset_scale = 0.5;  // std of the per-class channel offsets

  void validate() const;
};

/// Class-incremental stream: task t owns labels
/// [t * classes_per_task, (t + 1) * classes_per_task).
struct TaskStream {
  std::vector<TaskData> tasks;
  int classes_per_task = 0;
  Index tau = 0;
  Index n_features = 0;

  int num_tasks() const noexcept { return static_cast<int>(tasks.size()); }
  int total_classes() const noexcept { return num_tasks() * classes_per_task; }
};

/// Each class is a distinct random stable diagonal SSM per feature channel,
/// driven by white noise, plus a class offset and observation noise. 80/20
/// train/test split per class. Deterministic in the seed.
TaskStream generate_task_stream(const StreamConfig& config);

}  // namespace obsgrass
