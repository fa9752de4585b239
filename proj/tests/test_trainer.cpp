#include "obsgrass/error.hpp"
#include "obsgrass/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace obsgrass;
using namespace testing;

namespace {

StreamConfig small_stream(std::uint64_t seed) {
  StreamConfig s;
  s.seed = seed;
  s.num_tasks = 2;
  s.classes_per_task = 2;
  s.samples_per_class = 40;
  s.tau = 8;
  return s;
}

TrainConfig quick_train(LossVariant variant, double lambda) {
  TrainConfig t;
  t.loss.variant = variant;
  t.loss.lambda = lambda;
  t.optimizer.epochs = 3;
  t.optimizer.batch_size = 16;
  return t;
}

bool same_samples(const std::vector<Sample>& x, const std::vector<Sample>& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].label != y[i].label || x[i].x != y[i].x) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("stream is deterministic and class-disjoint") {
  const TaskStream a = generate_task_stream(small_stream(5));
  const TaskStream b = generate_task_stream(small_stream(5));
  const TaskStream c = generate_task_stream(small_stream(6));
  REQUIRE(a.num_tasks() == 2);
  CHECK(a.total_classes() == 4);
  for (int t = 0; t < 2; ++t) {
    CHECK(same_samples(a.tasks[t].train, b.tasks[t].train));
    CHECK(same_samples(a.tasks[t].test, b.tasks[t].test));
  }
  CHECK_FALSE(same_samples(a.tasks[0].train, c.tasks[0].train));

  std::set<int> seen;
  for (int t = 0; t < 2; ++t) {
    std::set<int> labels;
    for (const Sample& s : a.tasks[t].train) labels.insert(s.label);
    for (const Sample& s : a.tasks[t].test) labels.insert(s.label);
    CHECK(labels == std::set<int>(a.tasks[t].classes.begin(), a.tasks[t].classes.end()));
    for (int l : labels) CHECK(seen.insert(l).second);
    CHECK(a.tasks[t].train.size() == 64);  // 80% of 2 x 40
    CHECK(a.tasks[t].test.size() == 16);
  }
}

TEST_CASE("stream config validation") {
  StreamConfig s;
  s.num_tasks = 0;
  CHECK_THROWS_AS(generate_task_stream(s), Error);
  TrainConfig t;
  t.optimizer.epochs = 0;
  CHECK_THROWS_AS(train_sequential(generate_task_stream(small_stream(0)), t), Error);
}

TEST_CASE("regularized layer selection") {
  CHECK(regularized_layers(4, RegLayers::All) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(regularized_layers(4, RegLayers::LastHalf) == std::vector<std::size_t>{2, 3});
  CHECK(regularized_layers(4, RegLayers::Last) == std::vector<std::size_t>{3});
  CHECK(regularized_layers(1, RegLayers::LastHalf) == std::vector<std::size_t>{0});
}

TEST_CASE("full model gradient matches finite differences") {
  const TaskStream stream = generate_task_stream(small_stream(7));
  ModelConfig mc;
  mc.state_dim = 4;
  mc.layers = 2;
  const Classifier old_model = init_classifier(stream.n_features, stream.total_classes(), mc, 1);
  Classifier model = old_model;
  {
    std::mt19937_64 rng(2);
    Vector p = flatten(model);
    p += 0.05 * normal_vector(rng, p.size());
    unflatten(p, model);
  }
  std::vector<const Sample*> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(&stream.tasks[1].train[static_cast<std::size_t>(i)]);

  for (LossVariant variant : {LossVariant::None, LossVariant::Ism, LossVariant::IsmPlus, LossVariant::ParamMse,
                              LossVariant::OutputMse}) {
    CAPTURE(to_string(variant));
    TrainConfig cfg = quick_train(variant, 2.0);
    cfg.model = mc;
    cfg.loss.gamma = 0.5;
    cfg.loss.tau_outputs = 3;
    ClassifierGrad grad = ClassifierGrad::zeros_like(model);
    batch_objective(model, &old_model, batch, 4, cfg, &grad);
    const Vector g = flatten(grad);
    const Vector p0 = flatten(model);
    REQUIRE(g.size() == p0.size());

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<Index> pick(0, p0.size() - 1);
    const double h = 1e-6;
    for (int k = 0; k < 60; ++k) {
      const Index i = pick(rng);
      Classifier plus = model;
      Classifier minus = model;
      Vector pp = p0;
      pp[i] += h;
      unflatten(pp, plus);
      pp[i] -= 2.0 * h;
      unflatten(pp, minus);
      const double fp = batch_objective(plus, &old_model, batch, 4, cfg, nullptr).total;
      const double fm = batch_objective(minus, &old_model, batch, 4, cfg, nullptr).total;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(numeric - g[i]) / std::max({std::abs(numeric), std::abs(g[i]), 1e-6});
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("batch objective total is cls plus lambda times reg") {
  const TaskStream stream = generate_task_stream(small_stream(8));
  const Classifier old_model = init_classifier(stream.n_features, stream.total_classes(), ModelConfig{}, 1);
  const Classifier model = init_classifier(stream.n_features, stream.total_classes(), ModelConfig{}, 2);
  std::vector<const Sample*> batch;
  for (const Sample& s : stream.tasks[1].train) batch.push_back(&s);
  TrainConfig cfg = quick_train(LossVariant::Ism, 3.0);
  const LossValue v = batch_objective(model, &old_model, batch, 4, cfg, nullptr);
  CHECK(v.total == doctest::Approx(v.cls + 3.0 * v.reg).epsilon(1e-14));

  double reg = 0.0;
  for (const Sample* s : batch) {
    const AggregatedStates before = layer_states(forward(old_model, s->x).layers[0]);
    const AggregatedStates after = layer_states(forward(model, s->x).layers[0]);
    reg += ism_loss(before, after).value;
  }
  CHECK(v.reg == doctest::Approx(reg / static_cast<double>(batch.size())).epsilon(1e-12));
}

namespace {

// Unfilled upper-triangle entries are NaN; treat NaN as equal to NaN.
bool same_entries(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
  for (Index i = 0; i < x.size(); ++i) {
    const double u = x.data()[i];
    const double v = y.data()[i];
    if (!(u == v || (std::isnan(u) && std::isnan(v)))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("none and ism with zero lambda are bitwise identical") {
  const TaskStream stream = generate_task_stream(small_stream(9));
  const TrainResult a = train_sequential(stream, quick_train(LossVariant::None, 0.0));
  const TrainResult b = train_sequential(stream, quick_train(LossVariant::Ism, 0.0));
  CHECK(same_entries(a.accuracy.raw(), b.accuracy.raw()));
  CHECK(flatten(a.checkpoints.back()) == flatten(b.checkpoints.back()));
}

TEST_CASE("training is deterministic") {
  const TaskStream stream = generate_task_stream(small_stream(10));
  const TrainResult a = train_sequential(stream, quick_train(LossVariant::Ism, 5.0));
  const TrainResult b = train_sequential(stream, quick_train(LossVariant::Ism, 5.0));
  CHECK(same_entries(a.accuracy.raw(), b.accuracy.raw()));
  CHECK(flatten(a.checkpoints.back()) == flatten(b.checkpoints.back()));
}

TEST_CASE("exemplar-free audit") {
  const TaskStream stream = generate_task_stream(small_stream(11));
  const TrainResult r = train_sequential(stream, quick_train(LossVariant::Ism, 1.0));
  CHECK(exemplar_free(r.access_log));
  bool trained_task1 = false;
  for (const DataAccess& a : r.access_log) {
    if (a.phase_task == 1) {
      CHECK(a.accessed_task == 1);
      CHECK(a.split == Split::Train);
      trained_task1 = true;
    }
  }
  CHECK(trained_task1);

  std::vector<DataAccess> leaky = r.access_log;
  leaky.push_back({1, 0, Split::Train});
  CHECK_FALSE(exemplar_free(leaky));
  leaky.back() = {1, 1, Split::Test};
  CHECK_FALSE(exemplar_free(leaky));
}

TEST_CASE("single task run") {
  StreamConfig s = small_stream(12);
  s.num_tasks = 1;
  const TrainResult r = train_sequential(generate_task_stream(s), quick_train(LossVariant::Ism, 1.0));
  CHECK(r.accuracy.tasks() == 1);
  CHECK(r.checkpoints.size() == 1);
  CHECK_FALSE(compute_metrics(r.accuracy).final_fm().has_value());
}

TEST_CASE("task one is learnable within the default budget") {
  StreamConfig s;
  s.num_tasks = 1;
  const TrainResult r = train_sequential(generate_task_stream(s), TrainConfig{});
  CHECK(r.accuracy(0, 0) > 0.8);
}

TEST_CASE("ckd drift of a checkpoint against itself") {
  const TaskStream stream = generate_task_stream(small_stream(13));
  const TrainResult r = train_sequential(stream, quick_train(LossVariant::None, 0.0));
  std::vector<Matrix> probes;
  for (const Sample& s : stream.tasks[0].test) probes.push_back(s.x);
  const auto same = ckd_state_drift({r.checkpoints[0], r.checkpoints[0]}, probes);
  for (const CKDReport& rep : same) CHECK(rep.per_layer.cwiseAbs().maxCoeff() < 1e-10);
  const auto drift = ckd_state_drift(r.checkpoints, probes);
  CHECK(drift[0].state == 'A');
  CHECK(drift[2].state == 'C');
  CHECK(drift[0].per_layer.cols() == 2);
  CHECK_THROWS_AS(ckd_state_drift({r.checkpoints[0]}, probes), Error);
}

}  // TEST_SUITE
