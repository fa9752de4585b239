#include "obsgrass/task_stream.hpp"

#include "obsgrass/error.hpp"

#include <random>

namespace obsgrass {

void StreamConfig::validate() const {
  if (num_tasks < 1 || classes_per_task < 1 || samples_per_class < 1 || tau < 1 || n_features < 1 ||
      generator_order < 1) {
    throw Error(ErrorCode::ConfigError, "stream: all counts must be >= 1");
  }
  if (samples_per_class < 2) throw Error(ErrorCode::ConfigError, "stream: need >= 2 samples per class for a split");
  if (!(observation_noise >= 0.0) || !(class_offset_scale >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "stream: noise scales must be >= 0");
  }
}

namespace {

struct ClassGenerator {
  std::vector<DiagonalSSM> channels;
  Vector offset;
};

ClassGenerator make_class(std::mt19937_64& rng, const StreamConfig& cfg) {
  std::uniform_real_distribution<double> pole(-0.95, 0.95);
  std::normal_distribution<double> normal(0.0, 1.0);
  ClassGenerator gen;
  gen.offset.resize(cfg.n_features);
  for (Index f = 0; f < cfg.n_features; ++f) {
    Vector a(cfg.generator_order);
    Vector b(cfg.generator_order);
    RowVector c(cfg.generator_order);
    for (Index k = 0; k < cfg.generator_order; ++k) {
      a[k] = pole(rng);
      b[k] = normal(rng);
      c[k] = normal(rng);
    }
    gen.channels.emplace_back(std::move(a), std::move(b), std::move(c));
    gen.offset[f] = cfg.class_offset_scale * normal(rng);
  }
  return gen;
}

Matrix draw_sequence(std::mt19937_64& rng, const ClassGenerator& gen, const StreamConfig& cfg) {
  std::normal_distribution<double> normal(0.0, 1.0);
  // Burn-in so the sequence starts near the stationary regime.
  const Index burn = 16;
  Matrix x(cfg.tau, cfg.n_features);
  for (Index f = 0; f < cfg.n_features; ++f) {
    const DiagonalSSM& ssm = gen.channels[static_cast<std::size_t>(f)];
    Vector drive(burn + cfg.tau);
    for (Index t = 0; t < drive.size(); ++t) drive[t] = normal(rng);
    const Vector y = simulate(ssm, drive, Vector::Zero(ssm.n())).outputs;
    for (Index t = 0; t < cfg.tau; ++t) {
      x(t, f) = y[burn + t] + gen.offset[f] + cfg.observation_noise * normal(rng);
    }
  }
  return x;
}

}  // namespace

TaskStream generate_task_stream(const StreamConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  TaskStream stream;
  stream.classes_per_task = config.classes_per_task;
  stream.tau = config.tau;
  stream.n_features = config.n_features;

  const int train_per_class = std::max(1, (config.samples_per_class * 4) / 5);
  for (int t = 0; t < config.num_tasks; ++t) {
    TaskData task;
    for (int k = 0; k < config.classes_per_task; ++k) {
      const int label = t * config.classes_per_task + k;
      task.classes.push_back(label);
      const ClassGenerator gen = make_class(rng, config);
      for (int s = 0; s < config.samples_per_class; ++s) {
        Sample sample{draw_sequence(rng, gen, config), label};
        (s < train_per_class ? task.train : task.test).push_back(std::move(sample));
      }
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace obsgrass
