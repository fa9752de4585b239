#pragma once

#include "obsgrass/ssm.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace obsgrass {

struct BenchmarkRecord {
  std::string experiment;
  std::map<std::string, std::string> params;
  double mean_time = 0.0;  // seconds per call
  double std_time = 0.0;
  int iterations = 0;
  std::optional<std::uint64_t> flops;
};

inline constexpr const char* kBenchCsvHeader = "experiment,params,mean_time_s,std_time_s,iterations,flops";
std::string to_csv_row(const BenchmarkRecord& record);

struct BenchOutcome {
  std::vector<BenchmarkRecord> records;
  bool passed = true;
  std::string message;
};

/// Times gram_diagonal against gram_sylvester_dense on identical random
/// stable diagonal inputs. Fails when the measured dense/diagonal ratio at
/// n = 16 (if present) is below min_speedup, or when the diagonal path is
/// slower at any n.
BenchOutcome bench_sylvester(const std::vector<Index>& n_values, int iterations, std::uint64_t seed,
                             double min_speedup = 10.0);

/// Times simplified_distance against the truncated-basis principal-angle
/// pipelines (binet_cauchy, fubini_study, martin). Fails unless the
/// simplified distance is the fastest.
BenchOutcome bench_distance(Index n, int iterations, std::uint64_t seed);

/// Pearson correlation; NaN when either series is constant.
double pearson(const Vector& x, const Vector& y);

/// Two-sided p-value of r under the t approximation with count - 2 degrees
/// of freedom. NaN when r is NaN or count < 3.
double pearson_pvalue(double r, Index count);

struct MonteCarloConfig {
  int iterations = 10000;
  Index n = 16;
  int levels = 100;
  double noise_divisor = 25.0;  // level i perturbs with std i / noise_divisor
  double noise_scale = 1.0;     // extra multiplier; 0 disables the noise
  double guard_eps = 1e-12;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct MonteCarloResult {
  double mean_pearson = 0.0;
  double std_pearson = 0.0;
  double mean_pvalue = 0.0;
  double std_pvalue = 0.0;
  int iterations = 0;
  int degenerate_iterations = 0;  // constant cos(theta) series, no correlation
  Vector per_iteration;           // Pearson per iteration, NaN when degenerate
};

/// Samples A_diag, B, C ~ N(0, I_n) per iteration; level i adds Gaussian
/// noise with std noise_scale * i / noise_divisor to A_diag and C, soft
/// normalizes both systems, and records cos(theta) of the rank-1 distance.
/// Each iteration reports Pearson(i, cos(theta)); the result aggregates the
/// non-degenerate iterations.
MonteCarloResult mc_validate(const MonteCarloConfig& config);

/// Deterministic per-stream seed derivation.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace obsgrass
