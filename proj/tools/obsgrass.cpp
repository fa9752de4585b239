#include "obsgrass/error.hpp"
#include "obsgrass/experiments.hpp"
#include "obsgrass/grassmann.hpp"
#include "obsgrass/io.hpp"
#include "obsgrass/metrics.hpp"
#include "obsgrass/sylvester.hpp"
#include "obsgrass/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace obsgrass;

namespace {

enum Exit { kOk = 0, kInputError = 1, kBenchFailure = 2, kConditioning = 3 };

struct Global {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UnknownSolver:
    case ErrorCode::InsufficientTasks:
    case ErrorCode::SingularTransform:
      return kInputError;
    default:
      return kConditioning;
  }
}

unsigned thread_cap() {
  const char* env = std::getenv("OBSGRASS_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long v = std::stol(env);
    if (v >= 1) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, "OBSGRASS_THREADS must be a positive integer");
}

// Writes to <out>/<name> when --out is set, otherwise to stdout.
void emit(const Global& g, const std::string& name, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(g.out);
  const fs::path path = fs::path(g.out) / name;
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  f << text;
}

std::string records_text(const Global& g, const std::vector<BenchmarkRecord>& records) {
  if (g.format == "json") {
    Json arr = Json::array();
    for (const auto& r : records) {
      Json j{{"experiment", r.experiment},
             {"params", r.params},
             {"mean_time_s", r.mean_time},
             {"std_time_s", r.std_time},
             {"iterations", r.iterations}};
      j["flops"] = r.flops ? Json(*r.flops) : Json(nullptr);
      arr.push_back(j);
    }
    return dump_json(arr) + "\n";
  }
  std::ostringstream os;
  os << kBenchCsvHeader << '\n';
  for (const auto& r : records) os << to_csv_row(r) << '\n';
  return os.str();
}

int report_bench(const Global& g, const std::string& name, const BenchOutcome& outcome) {
  emit(g, name + (g.format == "json" ? ".json" : ".csv"), records_text(g, outcome.records));
  if (!outcome.message.empty()) std::cerr << name << ": " << outcome.message << '\n';
  if (!outcome.passed) {
    std::cerr << name << ": benchmark assertion failed\n";
    return kBenchFailure;
  }
  return kOk;
}

double distance_value(const AnySSM& s1, const AnySSM& s2, Metric metric) {
  if (state_dim(s1) != state_dim(s2)) {
    throw Error(ErrorCode::DimensionMismatch, "state dimensions differ: n=" + std::to_string(state_dim(s1)) +
                                                  " vs n=" + std::to_string(state_dim(s2)));
  }
  switch (metric) {
    case Metric::Chordal:
      return chordal_distance_sq(s1, s2).value;
    case Metric::Simplified: {
      const auto* d1 = std::get_if<DiagonalSSM>(&s1);
      const auto* d2 = std::get_if<DiagonalSSM>(&s2);
      if (d1 == nullptr || d2 == nullptr) {
        throw Error(ErrorCode::ConfigError, "the simplified metric needs two diagonal SSMs");
      }
      return simplified_distance(*d1, *d2).value;
    }
    default: {
      if (!is_schur_stable(s1) || !is_schur_stable(s2)) {
        throw Error(ErrorCode::NonFinite, "observability subspace is undefined for unstable A");
      }
      const Index horizon = default_horizon(std::max(spectral_radius(s1), spectral_radius(s2)));
      const Index n = state_dim(s1);
      const Index k = std::max(horizon, n);
      const PrincipalAngles pa =
          principal_angles_truncated(truncated_observability(s1, k), truncated_observability(s2, k));
      return classical_distance(pa, metric).value;
    }
  }
}

std::string metrics_text(const Global& g, const TaskAccuracyMatrix& acc, const CLMetrics& m) {
  if (g.format == "json") {
    Json rows = Json::array();
    for (Index k = 0; k < m.aa.size(); ++k) {
      rows.push_back(Json{{"k", k + 1},
                          {"AA", m.aa[k]},
                          {"AIA", m.aia[k]},
                          {"FM", std::isnan(m.fm[k]) ? Json(nullptr) : Json(m.fm[k])}});
    }
    Json a = Json::array();
    for (Index k = 0; k < acc.tasks(); ++k) {
      Json row = Json::array();
      for (Index j = 0; j <= k; ++j) row.push_back(acc(k, j));
      a.push_back(row);
    }
    return dump_json(Json{{"accuracy", a}, {"metrics", rows}}) + "\n";
  }
  std::ostringstream os;
  write_metrics_csv(os, m);
  return os.str();
}

int run_cl(const Global& g, const std::string& config_path) {
  RunConfig cfg = read_run_config(config_path);
  if (g.seed) {
    cfg.stream.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  const TaskStream stream = generate_task_stream(cfg.stream);
  const TrainResult result = train_sequential(stream, cfg.train);
  const CLMetrics m = compute_metrics(result.accuracy);

  const std::string ext = g.format == "json" ? ".json" : ".csv";
  emit(g, "metrics" + ext, metrics_text(g, result.accuracy, m));
  if (g.out.empty()) return kOk;

  std::ostringstream acc;
  write_accuracy_csv(acc, result.accuracy);
  emit(g, "accuracy.csv", acc.str());
  emit(g, "config.json", dump_json(run_config_to_json(cfg)) + "\n");
  fs::create_directories(fs::path(g.out) / "checkpoints");
  for (std::size_t t = 0; t < result.checkpoints.size(); ++t) {
    emit(g, "checkpoints/task_" + std::to_string(t + 1) + ".json",
         dump_json(checkpoint_to_json(result.checkpoints[t], static_cast<int>(t + 1))) + "\n");
  }
  if (cfg.ckd && result.checkpoints.size() >= 2) {
    // Task-1 test inputs probe every checkpoint after training is over.
    std::vector<Matrix> probes;
    for (const Sample& s : stream.tasks.front().test) probes.push_back(s.x);
    const auto drift = ckd_state_drift(result.checkpoints, probes);
    std::ostringstream os;
    os << std::setprecision(17) << "state,layer,task,ckd\n";
    for (const CKDReport& r : drift) {
      for (Index l = 0; l < r.per_layer.rows(); ++l) {
        for (Index k = 0; k < r.per_layer.cols(); ++k) {
          os << r.state << ',' << l << ',' << (k + 1) << ',' << r.per_layer(l, k) << '\n';
        }
      }
    }
    emit(g, "ckd.csv", os.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observability-subspace geometry of state-space models"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Random seed (default 0)");
  app.add_option("--out", g.out, "Output directory (default: stdout)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  std::vector<Index> syl_n{2, 4, 8, 16};
  int syl_iterations = 1000;
  double syl_floor = 10.0;
  auto* syl = app.add_subcommand(
      "bench-sylvester",
      "Time the diagonal Gram closed form against the dense Sylvester solve.\n"
      "CSV columns: " + std::string(kBenchCsvHeader) + "; params = n, solver");
  syl->add_option("--n", syl_n, "State dimensions, each in [2, 64]")->delimiter(',');
  syl->add_option("--iterations", syl_iterations, "Timed calls per solver and n (>= 100)");
  syl->add_option("--min-speedup", syl_floor, "Required dense/diagonal time ratio at n=16");

  Index dist_n = 100;
  int dist_iterations = 100;
  auto* dist_bench = app.add_subcommand(
      "bench-distance",
      "Time the simplified distance against truncated-basis principal-angle metrics.\n"
      "CSV columns: " + std::string(kBenchCsvHeader) + "; params = n, metric, horizon");
  dist_bench->add_option("--n", dist_n, "State dimension (>= 2)");
  dist_bench->add_option("--iterations", dist_iterations, "Timed calls per metric");

  MonteCarloConfig mc;
  bool zero_noise = false;
  auto* mcv = app.add_subcommand(
      "mc-validate",
      "Correlation between perturbation level and the simplified cos(theta).\n"
      "CSV columns: mean_pearson,std_pearson,mean_pvalue,std_pvalue,iterations,degenerate_iterations");
  mcv->add_option("--iterations", mc.iterations, "Monte Carlo iterations");
  mcv->add_option("--n", mc.n, "State dimension");
  mcv->add_option("--levels", mc.levels, "Noise levels i = 0..levels-1");
  mcv->add_option("--noise-divisor", mc.noise_divisor, "Level i uses noise std i / divisor");
  mcv->add_flag("--zero-noise", zero_noise, "Disable the perturbation (degenerate check)");

  std::string file1;
  std::string file2;
  std::string metric_name = "chordal";
  auto* dist = app.add_subcommand("distance", "Distance between two serialized SSMs, printed with 12 significant digits");
  dist->add_option("file1", file1, "First SSM JSON")->required();
  dist->add_option("file2", file2, "Second SSM JSON")->required();
  dist->add_option("--metric", metric_name,
                   "chordal (squared), simplified, binet_cauchy, fubini_study, martin, geodesic");

  std::string config_path;
  auto* cl = app.add_subcommand(
      "cl-run",
      "Sequential exemplar-free class-incremental run.\n"
      "Writes metrics (k,AA,AIA,FM); with --out also accuracy.csv (task_k,task_j,acc),\n"
      "ckd.csv (state,layer,task,ckd), config.json and checkpoints/task_<k>.json");
  cl->add_option("config", config_path, "Run config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }

  const std::uint64_t seed = g.seed.value_or(0);
  try {
    if (*syl) {
      if (syl_iterations < 100) throw Error(ErrorCode::ConfigError, "--iterations must be >= 100");
      for (Index n : syl_n) {
        if (n < 2 || n > 64) throw Error(ErrorCode::ConfigError, "--n values must lie in [2, 64]");
      }
      return report_bench(g, "bench_sylvester", bench_sylvester(syl_n, syl_iterations, seed, syl_floor));
    }
    if (*dist_bench) return report_bench(g, "bench_distance", bench_distance(dist_n, dist_iterations, seed));
    if (*mcv) {
      if (mc.iterations < 100) throw Error(ErrorCode::ConfigError, "--iterations must be >= 100");
      mc.seed = seed;
      mc.threads = thread_cap();
      if (zero_noise) mc.noise_scale = 0.0;
      const MonteCarloResult r = mc_validate(mc);
      if (g.format == "json") {
        emit(g, "mc_validate.json", dump_json(monte_carlo_to_json(r, mc)) + "\n");
      } else {
        char line[256];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.mean_pearson, r.std_pearson,
                      r.mean_pvalue, r.std_pvalue, r.iterations, r.degenerate_iterations);
        emit(g, "mc_validate.csv",
             std::string("mean_pearson,std_pearson,mean_pvalue,std_pvalue,iterations,degenerate_iterations\n") + line);
      }
      return kOk;
    }
    if (*dist) {
      const auto metric = parse_metric(metric_name);
      if (!metric) throw Error(ErrorCode::ConfigError, "unknown metric '" + metric_name + "'");
      const double value = distance_value(read_ssm_file(file1), read_ssm_file(file2), *metric);
      std::printf("%.12g\n", value);
      return kOk;
    }
    if (*cl) return run_cl(g, config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::IllConditionedGram) std::cerr << "hint: retry with --metric simplified\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}
