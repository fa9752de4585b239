#pragma once

#include "obsgrass/experiments.hpp"
#include "obsgrass/metrics.hpp"
#include "obsgrass/ssm.hpp"
#include "obsgrass/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace obsgrass {

using Json = nlohmann::json;

/// Writes JSON with every floating-point number printed using 17
/// significant digits (round-trip exact). NaN and infinities become null.
std::string dump_json(const Json& value, int indent = 2);

/// {"kind": "dense"|"diagonal", "n": int, "a": ..., "b": [...], "c": [...]}.
/// Dense "a" is written as nested rows; on input both nested rows and a
/// flat row-major array of n*n values are accepted.
Json ssm_to_json(const AnySSM& ssm);
AnySSM ssm_from_json(const Json& j);

AnySSM read_ssm_file(const std::filesystem::path& path);
void write_ssm_file(const std::filesystem::path& path, const AnySSM& ssm);

Json loss_config_to_json(const LossConfig& config);
LossConfig loss_config_from_json(const Json& j);

/// Full harness run configuration:
/// {"stream": {...}, "loss": {...}, "optimizer": {...}, "model": {...},
///  "reg_layers": "all", "seed": int, "ckd": bool}
struct RunConfig {
  StreamConfig stream;
  TrainConfig train;
  bool ckd = true;
};

Json run_config_to_json(const RunConfig& config);
/// Missing keys keep their defaults; malformed values throw ConfigError.
RunConfig run_config_from_json(const Json& j);
RunConfig read_run_config(const std::filesystem::path& path);

Json monte_carlo_to_json(const MonteCarloResult& result, const MonteCarloConfig& config);

/// Checkpoint: every layer's parameters, its zero-input aggregated state as
/// a diagonal SSM (ssm_core format), and the head.
Json checkpoint_to_json(const Classifier& model, int task);

/// CSV: task_k,task_j,acc (1-based task indices).
void write_accuracy_csv(std::ostream& os, const TaskAccuracyMatrix& acc);
/// CSV: k,AA,AIA,FM (FM empty where undefined).
void write_metrics_csv(std::ostream& os, const CLMetrics& metrics);

}  // namespace obsgrass
