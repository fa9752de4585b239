#include "obsgrass/model.hpp"

#include "obsgrass/error.hpp"

#include <cmath>
#include <random>

namespace obsgrass {

void ModelConfig::validate() const {
  if (state_dim < 1 || layers < 1) throw Error(ErrorCode::ConfigError, "model: state_dim and layers must be >= 1");
}

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double inverse_softplus(double y) { return std::log(std::expm1(y)); }

// (u e^u - (e^u - 1)), the numerator of d/dA [(exp(dA) - 1) / A] * A^2.
double zoh_a_numerator(double u, double e_u) {
  if (std::abs(u) < 1e-4) return u * u * (0.5 + u / 3.0);
  return u * e_u - std::expm1(u);
}

template <class Model, class Fn>
void for_each_block(Model& m, Fn&& fn) {
  for (auto& layer : m.layers) {
    fn(layer.a_log);
    fn(layer.b);
    fn(layer.w_c);
    fn(layer.c_bias);
    fn(layer.w_delta);
    fn(layer.b_delta);
  }
  fn(m.head.w);
  fn(m.head.bias);
}

}  // namespace

Classifier init_classifier(Index channels, Index classes, const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  if (channels < 1 || classes < 1) throw Error(ErrorCode::ConfigError, "model: channels and classes must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_delta(std::log(0.02), std::log(0.2));
  const Index n = config.state_dim;

  Classifier model;
  for (Index l = 0; l < config.layers; ++l) {
    SelectiveLayer layer{Matrix(channels, n), Matrix(channels, n), Matrix(n, channels), Vector(n),
                         Vector(channels), Vector(channels)};
    for (Index i = 0; i < channels; ++i) {
      for (Index k = 0; k < n; ++k) {
        layer.a_log(i, k) = std::log(static_cast<double>(k + 1));  // A = -(k+1)
        layer.b(i, k) = 1.0 + 0.1 * normal(rng);
      }
      layer.w_delta[i] = 0.1 * normal(rng);
      layer.b_delta[i] = inverse_softplus(std::exp(log_delta(rng)));
    }
    const double wc_scale = 0.5 / std::sqrt(static_cast<double>(channels));
    for (Index k = 0; k < n; ++k) {
      for (Index i = 0; i < channels; ++i) layer.w_c(k, i) = wc_scale * normal(rng);
      layer.c_bias[k] = 0.5 * normal(rng);
    }
    model.layers.push_back(std::move(layer));
  }
  model.head.w = Matrix(classes, channels);
  for (Index r = 0; r < classes; ++r) {
    for (Index i = 0; i < channels; ++i) model.head.w(r, i) = 0.01 * normal(rng);
  }
  model.head.bias = Vector::Zero(classes);
  return model;
}

ForwardCache forward(const Classifier& model, const Matrix& x) {
  const Index channels = model.channels();
  if (x.cols() != channels || x.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "forward: input must be tau x " + std::to_string(channels));
  }
  const Index steps = x.rows();
  ForwardCache cache;
  Matrix input = x;
  for (const SelectiveLayer& layer : model.layers) {
    const Index n = layer.state_dim();
    const Matrix a_cont = -layer.a_log.array().exp().matrix();
    LayerCache lc;
    lc.input = input;
    lc.z_delta.resize(steps, channels);
    lc.delta.resize(steps, channels);
    lc.states.a_bar.assign(static_cast<std::size_t>(steps), Matrix(channels, n));
    lc.states.b_bar.assign(static_cast<std::size_t>(steps), Matrix(channels, n));
    lc.states.c = (input * layer.w_c.transpose()).rowwise() + layer.c_bias.transpose();
    lc.hidden.assign(static_cast<std::size_t>(steps), Matrix(channels, n));
    lc.ssm_out.resize(steps, channels);

    Matrix h = Matrix::Zero(channels, n);
    for (Index t = 0; t < steps; ++t) {
      const auto st = static_cast<std::size_t>(t);
      Matrix& a_bar = lc.states.a_bar[st];
      Matrix& b_bar = lc.states.b_bar[st];
      for (Index i = 0; i < channels; ++i) {
        const double z = layer.w_delta[i] * input(t, i) + layer.b_delta[i];
        const double d = softplus(z);
        lc.z_delta(t, i) = z;
        lc.delta(t, i) = d;
        for (Index k = 0; k < n; ++k) {
          const double u = d * a_cont(i, k);
          a_bar(i, k) = std::exp(u);
          b_bar(i, k) = std::expm1(u) / a_cont(i, k) * layer.b(i, k);
        }
      }
      h = a_bar.cwiseProduct(h) + b_bar.cwiseProduct(input.row(t).transpose().replicate(1, n));
      lc.hidden[st] = h;
      lc.ssm_out.row(t) = (h * lc.states.c.row(t).transpose()).transpose();
    }
    lc.output = input + lc.ssm_out;
    if (!lc.output.allFinite()) throw Error(ErrorCode::NonFinite, "forward: non-finite layer output");
    input = lc.output;
    cache.layers.push_back(std::move(lc));
  }
  cache.pooled = input.colwise().mean().transpose();
  cache.logits = model.head.w * cache.pooled + model.head.bias;
  return cache;
}

AggregatedStates layer_states(const LayerCache& cache) { return aggregate_states(cache.states); }

ClassifierGrad ClassifierGrad::zeros_like(const Classifier& model) {
  ClassifierGrad g;
  for (const auto& layer : model.layers) {
    g.layers.push_back({Matrix::Zero(layer.a_log.rows(), layer.a_log.cols()),
                        Matrix::Zero(layer.b.rows(), layer.b.cols()),
                        Matrix::Zero(layer.w_c.rows(), layer.w_c.cols()), Vector::Zero(layer.c_bias.size()),
                        Vector::Zero(layer.w_delta.size()), Vector::Zero(layer.b_delta.size())});
  }
  g.head = {Matrix::Zero(model.head.w.rows(), model.head.w.cols()), Vector::Zero(model.head.bias.size())};
  return g;
}

void ClassifierGrad::add_scaled(const ClassifierGrad& other, double scale) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    SelectiveLayer& x = layers[l];
    const SelectiveLayer& y = other.layers[l];
    x.a_log += scale * y.a_log;
    x.b += scale * y.b;
    x.w_c += scale * y.w_c;
    x.c_bias += scale * y.c_bias;
    x.w_delta += scale * y.w_delta;
    x.b_delta += scale * y.b_delta;
  }
  head.w += scale * other.head.w;
  head.bias += scale * other.head.bias;
}

void backward(const Classifier& model, const ForwardCache& cache, const Vector& d_logits,
              const std::vector<LayerUpstream>& upstream, ClassifierGrad& grad) {
  const auto num_layers = model.layers.size();
  const Index steps = cache.layers.front().input.rows();
  const double inv_tau = 1.0 / static_cast<double>(steps);

  grad.head.w.noalias() += d_logits * cache.pooled.transpose();
  grad.head.bias += d_logits;
  const Vector d_pooled = model.head.w.transpose() * d_logits;
  Matrix d_out = (d_pooled * inv_tau).transpose().replicate(steps, 1);

  for (std::size_t l = num_layers; l-- > 0;) {
    const SelectiveLayer& layer = model.layers[l];
    const LayerCache& lc = cache.layers[l];
    SelectiveLayer& g = grad.layers[l];
    const Index channels = layer.channels();
    const Index n = layer.state_dim();
    const Matrix a_cont = -layer.a_log.array().exp().matrix();
    const LayerUpstream* up = l < upstream.size() ? &upstream[l] : nullptr;

    Matrix d_x = d_out;
    Matrix d_y = d_out;
    if (up != nullptr && up->d_ssm_out.size() > 0) d_y += up->d_ssm_out;

    Matrix d_c = Matrix::Zero(steps, n);
    std::vector<Matrix> d_abar(static_cast<std::size_t>(steps), Matrix::Zero(channels, n));
    std::vector<Matrix> d_bbar(static_cast<std::size_t>(steps), Matrix::Zero(channels, n));

    if (up != nullptr && (up->d_a_tilde.size() > 0 || up->d_b_tilde.size() > 0 || up->d_c_tilde.size() > 0)) {
      const AggregatedStates agg = aggregate_states(lc.states);
      const double inv_o = 1.0 / static_cast<double>(channels);
      for (Index t = 0; t < steps; ++t) {
        const auto st = static_cast<std::size_t>(t);
        for (Index k = 0; k < n; ++k) {
          if (up->d_a_tilde.size() > 0) {
            const double s = up->d_a_tilde(t, k) * soft_normalize_derivative_from_output(agg.a_tilde(t, k)) * inv_o;
            d_abar[st].col(k).array() += s;
          }
          if (up->d_b_tilde.size() > 0) {
            const double s = up->d_b_tilde(t, k) * soft_normalize_derivative_from_output(agg.b_tilde(t, k)) * inv_o;
            d_bbar[st].col(k).array() += s;
          }
          if (up->d_c_tilde.size() > 0) {
            d_c(t, k) += up->d_c_tilde(t, k) * soft_normalize_derivative_from_output(agg.c_tilde(t, k));
          }
        }
      }
    }

    // Reverse scan.
    Matrix d_h_next = Matrix::Zero(channels, n);
    for (Index t = steps; t-- > 0;) {
      const auto st = static_cast<std::size_t>(t);
      const Matrix& h = lc.hidden[st];
      Matrix d_h = d_y.row(t).transpose() * lc.states.c.row(t) + d_h_next;
      d_c.row(t) += d_y.row(t) * h;
      if (t > 0) d_abar[st] += d_h.cwiseProduct(lc.hidden[st - 1]);
      d_bbar[st] += d_h.cwiseProduct(lc.input.row(t).transpose().replicate(1, n));
      d_x.row(t) += d_h.cwiseProduct(lc.states.b_bar[st]).rowwise().sum().transpose();
      d_h_next = d_h.cwiseProduct(lc.states.a_bar[st]);
    }

    // Through the discretization.
    Matrix d_a = Matrix::Zero(channels, n);
    Matrix d_delta = Matrix::Zero(steps, channels);
    for (Index t = 0; t < steps; ++t) {
      const auto st = static_cast<std::size_t>(t);
      const Matrix& a_bar = lc.states.a_bar[st];
      for (Index i = 0; i < channels; ++i) {
        const double d = lc.delta(t, i);
        for (Index k = 0; k < n; ++k) {
          const double a = a_cont(i, k);
          const double e = a_bar(i, k);
          const double u = d * a;
          const double ga = d_abar[st](i, k);
          const double gb = d_bbar[st](i, k);
          d_delta(t, i) += ga * e * a + gb * layer.b(i, k) * e;
          d_a(i, k) += ga * e * d + gb * layer.b(i, k) * zoh_a_numerator(u, e) / (a * a);
          g.b(i, k) += gb * std::expm1(u) / a;
        }
      }
    }
    g.a_log += d_a.cwiseProduct(a_cont);

    const Matrix d_z = d_delta.cwiseProduct(lc.z_delta.unaryExpr([](double z) { return sigmoid(z); }));
    g.w_delta += d_z.cwiseProduct(lc.input).colwise().sum().transpose();
    g.b_delta += d_z.colwise().sum().transpose();
    d_x += d_z.cwiseProduct(layer.w_delta.transpose().replicate(steps, 1));

    g.w_c.noalias() += d_c.transpose() * lc.input;
    g.c_bias += d_c.colwise().sum().transpose();
    d_x.noalias() += d_c * layer.w_c;

    d_out = std::move(d_x);
  }
}

Index parameter_count(const Classifier& model) {
  Index count = 0;
  for_each_block(model, [&](const auto& block) { count += block.size(); });
  return count;
}

Vector flatten(const Classifier& model) {
  Vector out(parameter_count(model));
  Index pos = 0;
  for_each_block(model, [&](const auto& block) {
    out.segment(pos, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
    pos += block.size();
  });
  return out;
}

void unflatten(const Vector& params, Classifier& model) {
  if (params.size() != parameter_count(model)) {
    throw Error(ErrorCode::DimensionMismatch, "unflatten: parameter vector has the wrong length");
  }
  Index pos = 0;
  for_each_block(model, [&](auto& block) {
    Eigen::Map<Vector>(block.data(), block.size()) = params.segment(pos, block.size());
    pos += block.size();
  });
}

Vector flatten(const ClassifierGrad& grad) {
  Index count = 0;
  for_each_block(grad, [&](const auto& block) { count += block.size(); });
  Vector out(count);
  Index pos = 0;
  for_each_block(grad, [&](const auto& block) {
    out.segment(pos, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
    pos += block.size();
  });
  return out;
}

}  // namespace obsgrass
