#include "obsgrass/experiments.hpp"

#include "obsgrass/error.hpp"
#include "obsgrass/grassmann.hpp"
#include "obsgrass/sylvester.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace obsgrass {

namespace {

using Clock = std::chrono::steady_clock;

struct Timing {
  double mean = 0.0;
  double stdev = 0.0;
};

Timing summarize(const std::vector<double>& samples) {
  Timing t;
  if (samples.empty()) return t;
  for (double s : samples) t.mean += s;
  t.mean /= static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double acc = 0.0;
    for (double s : samples) acc += (s - t.mean) * (s - t.mean);
    t.stdev = std::sqrt(acc / static_cast<double>(samples.size() - 1));
  }
  return t;
}

// Times fn() once per iteration after a short warm-up.
template <class Fn>
Timing time_calls(int iterations, Fn&& fn) {
  volatile double sink = 0.0;
  for (int i = 0; i < std::min(iterations, 10); ++i) sink = sink + fn();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto start = Clock::now();
    sink = sink + fn();
    samples.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  return summarize(samples);
}

Vector normal_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

DiagonalSSM random_soft_normalized(std::mt19937_64& rng, Index n) {
  const Vector a = normal_vector(rng, n).unaryExpr([](double x) { return soft_normalize(x); });
  const Vector b = normal_vector(rng, n);
  const RowVector c = normal_vector(rng, n).unaryExpr([](double x) { return soft_normalize(x); }).transpose();
  return DiagonalSSM(a, b, c);
}

}  // namespace

std::string to_csv_row(const BenchmarkRecord& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.experiment << ',';
  bool first = true;
  for (const auto& [key, value] : r.params) {
    os << (first ? "" : ";") << key << '=' << value;
    first = false;
  }
  os << ',' << r.mean_time << ',' << r.std_time << ',' << r.iterations << ',';
  if (r.flops) os << *r.flops;
  return os.str();
}

BenchOutcome bench_sylvester(const std::vector<Index>& n_values, int iterations, std::uint64_t seed,
                             double min_speedup) {
  if (iterations < 1) throw Error(ErrorCode::ConfigError, "bench_sylvester: iterations must be >= 1");
  BenchOutcome out;
  std::mt19937_64 rng(seed);
  std::ostringstream msg;
  for (Index n : n_values) {
    if (n < 1 || n > 64) throw Error(ErrorCode::ConfigError, "bench_sylvester: n must lie in [1, 64]");
    const DiagonalSSM s1 = random_soft_normalized(rng, n);
    const DiagonalSSM s2 = random_soft_normalized(rng, n);
    const Matrix a1 = s1.a_diag().asDiagonal();
    const Matrix a2 = s2.a_diag().asDiagonal();

    const Timing diag = time_calls(iterations, [&] {
      return gram_diagonal(s1.a_diag(), s1.c(), s2.a_diag(), s2.c()).g(0, 0);
    });
    const Timing dense = time_calls(iterations, [&] { return gram_sylvester_dense(a1, s1.c(), a2, s2.c()).g(0, 0); });

    const std::string ns = std::to_string(n);
    out.records.push_back({"sylvester", {{"n", ns}, {"solver", "diagonal"}}, diag.mean, diag.stdev, iterations,
                           count_flops("diagonal", n).flops});
    out.records.push_back({"sylvester", {{"n", ns}, {"solver", "dense"}}, dense.mean, dense.stdev, iterations,
                           count_flops("dense-reference", n).flops});

    const double ratio = dense.mean / diag.mean;
    if (!(diag.mean <= dense.mean)) {
      out.passed = false;
      msg << "diagonal path slower than dense at n=" << n << "; ";
    }
    if (n == 16 && !(ratio >= min_speedup)) {
      out.passed = false;
      msg << "speedup " << ratio << " at n=16 below floor " << min_speedup << "; ";
    }
  }
  out.message = msg.str();
  return out;
}

BenchOutcome bench_distance(Index n, int iterations, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::ConfigError, "bench_distance: n must be >= 2");
  if (iterations < 1) throw Error(ErrorCode::ConfigError, "bench_distance: iterations must be >= 1");
  std::mt19937_64 rng(seed);

  const DiagonalSSM d1 = random_soft_normalized(rng, n);
  const DiagonalSSM d2 = random_soft_normalized(rng, n);

  // Dense Gaussian A rescaled to spectral radius 0.9, C Gaussian.
  auto dense_system = [&] {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) a(i, j) = normal(rng);
    }
    const double rho = spectral_radius(DenseSSM(a, Vector::Zero(n), RowVector::Ones(n)));
    a *= 0.9 / rho;
    return DenseSSM(a, normal_vector(rng, n), normal_vector(rng, n).transpose());
  };
  const DenseSSM s1 = dense_system();
  const DenseSSM s2 = dense_system();
  const Index horizon = 2 * n;

  auto angles = [&] {
    const Matrix o1 = truncated_observability(s1, horizon);
    const Matrix o2 = truncated_observability(s2, horizon);
    const Matrix q1 = o1.householderQr().householderQ() * Matrix::Identity(horizon, n);
    const Matrix q2 = o2.householderQr().householderQ() * Matrix::Identity(horizon, n);
    return principal_angles_from_bases(q1, q2);
  };

  BenchOutcome out;
  const std::string ns = std::to_string(n);
  const Timing simplified = time_calls(iterations, [&] { return simplified_distance(d1, d2).value; });
  out.records.push_back({"distance", {{"n", ns}, {"metric", "simplified"}}, simplified.mean, simplified.stdev,
                         iterations, std::nullopt});

  double slowest = 0.0;
  double fastest_classical = std::numeric_limits<double>::infinity();
  for (Metric m : {Metric::BinetCauchy, Metric::FubiniStudy, Metric::Martin}) {
    const Timing t = time_calls(iterations, [&] {
      const PrincipalAngles pa = angles();
      try {
        return classical_distance(pa, m).value;
      } catch (const Error&) {
        return 0.0;  // Martin is infinite on orthogonal directions; the work is what's timed.
      }
    });
    out.records.push_back({"distance", {{"n", ns}, {"metric", std::string(to_string(m))}, {"horizon",
                           std::to_string(horizon)}}, t.mean, t.stdev, iterations, std::nullopt});
    slowest = std::max(slowest, t.mean);
    fastest_classical = std::min(fastest_classical, t.mean);
  }
  if (!(simplified.mean < fastest_classical)) {
    out.passed = false;
    out.message = "simplified distance is not the fastest metric";
  } else if (!(slowest <= 2.0 * fastest_classical)) {
    out.message = "note: classical metrics differ by more than 2x";
  }
  return out;
}

double pearson(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::DimensionMismatch, "pearson: bad lengths");
  const Vector dx = x.array() - x.mean();
  const Vector dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_pvalue(double r, Index count) {
  if (std::isnan(r) || count < 3) return std::numeric_limits<double>::quiet_NaN();
  const double df = static_cast<double>(count - 2);
  if (std::abs(r) >= 1.0) return 0.0;
  const double t = r * std::sqrt(df / (1.0 - r * r));
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void MonteCarloConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::ConfigError, "mc: iterations must be >= 1");
  if (n < 1) throw Error(ErrorCode::ConfigError, "mc: n must be >= 1");
  if (levels < 3) throw Error(ErrorCode::ConfigError, "mc: need >= 3 noise levels");
  if (!(noise_divisor > 0.0) || !(noise_scale >= 0.0)) throw Error(ErrorCode::ConfigError, "mc: bad noise scale");
}

namespace {

double mc_iteration(const MonteCarloConfig& cfg, std::uint64_t iteration) {
  std::mt19937_64 rng(mix_seed(cfg.seed, iteration));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = cfg.n;
  const Vector a = normal_vector(rng, n);
  [[maybe_unused]] const Vector b = normal_vector(rng, n);  // sampled per protocol; distance ignores B
  const Vector c = normal_vector(rng, n);
  auto sn = [](const Vector& v) { return Vector(v.unaryExpr([](double x) { return soft_normalize(x); })); };
  const DiagonalSSM reference(sn(a), b, sn(c).transpose());

  Vector level(cfg.levels);
  Vector cos_theta(cfg.levels);
  for (int i = 0; i < cfg.levels; ++i) {
    const double std_dev = cfg.noise_scale * static_cast<double>(i) / cfg.noise_divisor;
    Vector a2 = a;
    Vector c2 = c;
    for (Index k = 0; k < n; ++k) a2[k] += std_dev * normal(rng);
    for (Index k = 0; k < n; ++k) c2[k] += std_dev * normal(rng);
    const DiagonalSSM perturbed(sn(a2), b, sn(c2).transpose());
    level[i] = static_cast<double>(i);
    cos_theta[i] = std::sqrt(simplified_cos_sq(reference, perturbed, cfg.guard_eps));
  }
  return pearson(level, cos_theta);
}

}  // namespace

MonteCarloResult mc_validate(const MonteCarloConfig& config) {
  config.validate();
  MonteCarloResult out;
  out.iterations = config.iterations;
  out.per_iteration.resize(config.iterations);

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.iterations)));
  auto run_range = [&](int begin, int end) {
    for (int it = begin; it < end; ++it) out.per_iteration[it] = mc_iteration(config, static_cast<std::uint64_t>(it));
  };
  if (workers == 1) {
    run_range(0, config.iterations);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (config.iterations + static_cast<int>(workers) - 1) / static_cast<int>(workers);
    for (unsigned w = 0; w < workers; ++w) {
      const int begin = static_cast<int>(w) * chunk;
      const int end = std::min(config.iterations, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  // Ordered reduction keeps the result independent of the thread count.
  std::vector<double> r;
  std::vector<double> p;
  for (int it = 0; it < config.iterations; ++it) {
    const double value = out.per_iteration[it];
    if (std::isnan(value)) {
      ++out.degenerate_iterations;
      continue;
    }
    r.push_back(value);
    p.push_back(pearson_pvalue(value, config.levels));
  }
  if (r.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.mean_pearson = out.std_pearson = out.mean_pvalue = out.std_pvalue = nan;
    return out;
  }
  auto mean_std = [](const std::vector<double>& v, double& mean, double& stdev) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    stdev = std::sqrt(acc / static_cast<double>(v.size()));
  };
  mean_std(r, out.mean_pearson, out.std_pearson);
  mean_std(p, out.mean_pvalue, out.std_pvalue);
  return out;
}

}  // namespace obsgrass
