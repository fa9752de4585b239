#include "obsgrass/io.hpp"

#include "obsgrass/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace obsgrass {

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // Keep reals recognisably real on re-read.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

void dump_impl(const Json& v, int indent, int depth, std::ostringstream& os) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (v.type()) {
    case Json::value_t::number_float:
      os << format_double(v.get<double>());
      return;
    case Json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
        dump_impl(it.value(), indent, depth + 1, os);
      }
      os << nl << close_pad << '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); });
      os << '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) os << (flat ? ", " : ",");
        if (!flat) os << nl << pad;
        first = false;
        dump_impl(e, indent, depth + 1, os);
      }
      if (!flat) os << nl << close_pad;
      os << ']';
      return;
    }
    default:
      os << v.dump();
  }
}

Json to_array(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_array(const RowVector& v) { return to_array(Vector(v.transpose())); }

Json to_rows(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(to_array(Vector(m.row(r).transpose())));
  return out;
}

Vector vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::ParseError, std::string(what) + " must hold numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from(const Json& j, Index rows, Index cols, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an array");
  Matrix m(rows, cols);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<Index>(j.size()) != rows) {
      throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(j.size()) +
                                                    " rows, expected " + std::to_string(rows));
    }
    for (Index r = 0; r < rows; ++r) {
      const Vector row = vector_from(j[static_cast<std::size_t>(r)], what);
      if (row.size() != cols) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " row " + std::to_string(r) +
                                                      " has " + std::to_string(row.size()) + " entries");
      }
      m.row(r) = row.transpose();
    }
    return m;
  }
  const Vector flat = vector_from(j, what);
  if (flat.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(flat.size()) +
                                                  " entries, expected " + std::to_string(rows * cols));
  }
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = flat[r * cols + c];
  }
  return m;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string dump_json(const Json& value, int indent) {
  std::ostringstream os;
  dump_impl(value, indent, 0, os);
  return os.str();
}

Json ssm_to_json(const AnySSM& ssm) {
  if (const auto* d = std::get_if<DiagonalSSM>(&ssm)) {
    return Json{{"kind", "diagonal"}, {"n", d->n()}, {"a", to_array(d->a_diag())}, {"b", to_array(d->b())},
                {"c", to_array(d->c())}};
  }
  const auto& s = std::get<DenseSSM>(ssm);
  return Json{{"kind", "dense"}, {"n", s.n()}, {"a", to_rows(s.a())}, {"b", to_array(s.b())}, {"c", to_array(s.c())}};
}

AnySSM ssm_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "SSM must be a JSON object");
  for (const char* key : {"kind", "n", "a", "b", "c"}) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string("SSM is missing '") + key + "'");
  }
  if (!j["kind"].is_string()) throw Error(ErrorCode::ParseError, "SSM 'kind' must be a string");
  if (!j["n"].is_number_integer() || j["n"].get<long long>() < 1) {
    throw Error(ErrorCode::ParseError, "SSM 'n' must be a positive integer");
  }
  const auto kind = j["kind"].get<std::string>();
  const auto n = static_cast<Index>(j["n"].get<long long>());
  const Vector b = vector_from(j["b"], "b");
  const Vector c = vector_from(j["c"], "c");
  if (b.size() != n || c.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "SSM b/c lengths do not match n=" + std::to_string(n));
  }
  if (kind == "diagonal") {
    const Vector a = vector_from(j["a"], "a");
    if (a.size() != n) throw Error(ErrorCode::DimensionMismatch, "diagonal SSM 'a' length does not match n");
    return DiagonalSSM(a, b, c.transpose());
  }
  if (kind == "dense") return DenseSSM(matrix_from(j["a"], n, n, "a"), b, c.transpose());
  throw Error(ErrorCode::ParseError, "SSM 'kind' must be \"dense\" or \"diagonal\"");
}

AnySSM read_ssm_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return ssm_from_json(j);
}

void write_ssm_file(const std::filesystem::path& path, const AnySSM& ssm) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << dump_json(ssm_to_json(ssm)) << '\n';
}

Json loss_config_to_json(const LossConfig& config) {
  return Json{{"variant", std::string(to_string(config.variant))},
              {"lambda", config.lambda},
              {"gamma", config.gamma},
              {"tau_outputs", config.tau_outputs}};
}

LossConfig loss_config_from_json(const Json& j) {
  LossConfig cfg;
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "'loss' must be an object");
  const auto variant = get_or<std::string>(j, "variant", std::string(to_string(cfg.variant)));
  const auto parsed = parse_loss_variant(variant);
  if (!parsed) throw Error(ErrorCode::ConfigError, "unknown loss variant '" + variant + "'");
  cfg.variant = *parsed;
  cfg.lambda = get_or<double>(j, "lambda", cfg.lambda);
  cfg.gamma = get_or<double>(j, "gamma", cfg.gamma);
  cfg.tau_outputs = get_or<Index>(j, "tau_outputs", cfg.tau_outputs);
  cfg.validate();
  return cfg;
}

Json run_config_to_json(const RunConfig& c) {
  const StreamConfig& s = c.stream;
  const TrainConfig& t = c.train;
  return Json{{"stream",
               {{"seed", s.seed},
                {"num_tasks", s.num_tasks},
                {"classes_per_task", s.classes_per_task},
                {"samples_per_class", s.samples_per_class},
                {"tau", s.tau},
                {"n_features", s.n_features},
                {"generator_order", s.generator_order},
                {"observation_noise", s.observation_noise},
                {"class_offset_scale", s.class_offset_scale}}},
              {"loss", loss_config_to_json(t.loss)},
              {"optimizer",
               {{"learning_rate", t.optimizer.learning_rate},
                {"epochs", t.optimizer.epochs},
                {"batch_size", t.optimizer.batch_size},
                {"cosine_decay", t.optimizer.cosine_decay}}},
              {"model", {{"state_dim", t.model.state_dim}, {"layers", t.model.layers}}},
              {"reg_layers", std::string(to_string(t.reg_layers))},
              {"seed", t.seed},
              {"ckd", c.ckd}};
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "run config must be a JSON object");
  RunConfig c;
  if (j.contains("stream")) {
    const Json& s = j["stream"];
    StreamConfig& d = c.stream;
    d.seed = get_or<std::uint64_t>(s, "seed", d.seed);
    d.num_tasks = get_or<int>(s, "num_tasks", d.num_tasks);
    d.classes_per_task = get_or<int>(s, "classes_per_task", d.classes_per_task);
    d.samples_per_class = get_or<int>(s, "samples_per_class", d.samples_per_class);
    d.tau = get_or<Index>(s, "tau", d.tau);
    d.n_features = get_or<Index>(s, "n_features", d.n_features);
    d.generator_order = get_or<Index>(s, "generator_order", d.generator_order);
    d.observation_noise = get_or<double>(s, "observation_noise", d.observation_noise);
    d.class_offset_scale = get_or<double>(s, "class_offset_scale", d.class_offset_scale);
  }
  if (j.contains("loss")) c.train.loss = loss_config_from_json(j["loss"]);
  if (j.contains("optimizer")) {
    const Json& o = j["optimizer"];
    OptimizerConfig& d = c.train.optimizer;
    d.learning_rate = get_or<double>(o, "learning_rate", d.learning_rate);
    d.epochs = get_or<int>(o, "epochs", d.epochs);
    d.batch_size = get_or<int>(o, "batch_size", d.batch_size);
    d.cosine_decay = get_or<bool>(o, "cosine_decay", d.cosine_decay);
  }
  if (j.contains("model")) {
    const Json& m = j["model"];
    c.train.model.state_dim = get_or<Index>(m, "state_dim", c.train.model.state_dim);
    c.train.model.layers = get_or<Index>(m, "layers", c.train.model.layers);
  }
  if (j.contains("reg_layers")) {
    const auto name = get_or<std::string>(j, "reg_layers", "all");
    const auto parsed = parse_reg_layers(name);
    if (!parsed) throw Error(ErrorCode::ConfigError, "unknown reg_layers '" + name + "'");
    c.train.reg_layers = *parsed;
  }
  c.train.seed = get_or<std::uint64_t>(j, "seed", c.train.seed);
  c.ckd = get_or<bool>(j, "ckd", c.ckd);
  c.stream.validate();
  c.train.validate();
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

Json monte_carlo_to_json(const MonteCarloResult& r, const MonteCarloConfig& c) {
  return Json{{"mean_pearson", r.mean_pearson},
              {"std_pearson", r.std_pearson},
              {"mean_pvalue", r.mean_pvalue},
              {"std_pvalue", r.std_pvalue},
              {"iterations", r.iterations},
              {"degenerate_iterations", r.degenerate_iterations},
              {"n", c.n},
              {"levels", c.levels},
              {"noise_divisor", c.noise_divisor},
              {"seed", c.seed}};
}

Json checkpoint_to_json(const Classifier& model, int task) {
  Json layers = Json::array();
  for (const SelectiveLayer& layer : model.layers) {
    // Zero input: delta = softplus(b_delta), C = c_bias.
    Classifier probe;
    probe.layers = {layer};
    probe.head = {Matrix::Zero(1, layer.channels()), Vector::Zero(1)};
    const ForwardCache cache = forward(probe, Matrix::Zero(1, layer.channels()));
    const AggregatedStates s = layer_states(cache.layers.front());
    layers.push_back(Json{{"params",
                           {{"a_log", to_rows(layer.a_log)},
                            {"b", to_rows(layer.b)},
                            {"w_c", to_rows(layer.w_c)},
                            {"c_bias", to_array(layer.c_bias)},
                            {"w_delta", to_array(layer.w_delta)},
                            {"b_delta", to_array(layer.b_delta)}}},
                          {"ssm", ssm_to_json(s.slice(0))}});
  }
  return Json{{"task", task},
              {"layers", layers},
              {"head", {{"w", to_rows(model.head.w)}, {"bias", to_array(model.head.bias)}}}};
}

void write_accuracy_csv(std::ostream& os, const TaskAccuracyMatrix& acc) {
  os << "task_k,task_j,acc\n";
  for (Index k = 0; k < acc.tasks(); ++k) {
    for (Index j = 0; j <= k; ++j) os << (k + 1) << ',' << (j + 1) << ',' << format_double(acc(k, j)) << '\n';
  }
}

void write_metrics_csv(std::ostream& os, const CLMetrics& m) {
  os << "k,AA,AIA,FM\n";
  for (Index k = 0; k < m.aa.size(); ++k) {
    os << (k + 1) << ',' << format_double(m.aa[k]) << ',' << format_double(m.aia[k]) << ',';
    if (!std::isnan(m.fm[k])) os << format_double(m.fm[k]);
    os << '\n';
  }
}

}  // namespace obsgrass
