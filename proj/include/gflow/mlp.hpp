#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflow/error.hpp"
#include "gflow/rng.hpp"

namespace gflow {

enum class Activation { identity, tanh, relu, sigmoid };

inline const char* activation_name(Activation a) {
  switch (a) {
  case Activation::identity: return "identity";
  case Activation::tanh: return "tanh";
  case Activation::relu: return "relu";
  case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

/// Numerically safe logistic function.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// ln(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Activations and pre-activations of a forward pass over a batch of rows, kept for backpropagation.
/// Layer buffers are row-major (rows x width).
struct Tape {
  std::size_t rows = 1;
  std::vector<std::vector<double>> a;  ///< a[0] = input, a.back() = output
  std::vector<std::vector<double>> z;  ///< z[l] = pre-activation of layer l+1

  std::span<const double> output() const { return a.back(); }
  /// Pre-activation of the output layer (the logit for a sigmoid network).
  std::span<const double> logit() const { return z.back(); }
};

/// Fully connected network. Parameters live in one flat vector: for each layer the weight matrix
/// (n_out x n_in, row-major) followed by its bias (n_out).
class Mlp {
public:
  Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output)
      : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) throw DimensionError("an MLP needs at least an input and an output layer");
    for (std::size_t s : sizes_)
      if (s == 0) throw DimensionError("layer sizes must be positive");
    if (hidden_ != Activation::tanh && hidden_ != Activation::relu)
      throw std::invalid_argument("hidden activation must be tanh or relu");
    if (output_ != Activation::identity && output_ != Activation::sigmoid)
      throw std::invalid_argument("output activation must be identity or sigmoid");
    if (output_ == Activation::sigmoid && sizes_.back() != 1)
      throw DimensionError("a sigmoid-output network must have a single output");
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(count);
      count += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    params_.assign(count, 0.0);
  }

  /// LeCun-normal weights, zero biases.
  static Mlp random(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output, std::uint64_t seed,
                    double gain = 1.0) {
    Mlp net(std::move(layer_sizes), hidden, output);
    Rng rng(seed);
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const double sd = gain / std::sqrt(static_cast<double>(net.sizes_[l]));
      double* w = net.params_.data() + net.offsets_[l];
      for (std::size_t k = 0; k < net.sizes_[l] * net.sizes_[l + 1]; ++k) w[k] = sd * rng.normal();
    }
    return net;
  }

  std::size_t layers() const noexcept { return sizes_.size() - 1; }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  Activation hidden_activation() const noexcept { return hidden_; }
  Activation output_activation() const noexcept { return output_; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  Tape forward(std::span<const double> input) const { return forward_batch(input, 1); }

  /// Forward pass over `rows` inputs stored row-major.
  Tape forward_batch(std::span<const double> inputs, std::size_t rows) const {
    if (rows == 0 || inputs.size() != rows * input_dim()) throw DimensionError("network input has the wrong length");
    Tape t;
    t.rows = rows;
    t.a.reserve(sizes_.size());
    t.z.reserve(layers());
    t.a.emplace_back(inputs.begin(), inputs.end());
    for (std::size_t l = 0; l < layers(); ++l) {
      const std::size_t n_in = sizes_[l];
      const std::size_t n_out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + n_in * n_out;
      const double* prev = t.a.back().data();
      std::vector<double> z(rows * n_out);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = prev + r * n_in;
        for (std::size_t o = 0; o < n_out; ++o) {
          const double* wo = w + o * n_in;
          double s = b[o];
          for (std::size_t i = 0; i < n_in; ++i) s += wo[i] * x[i];
          z[r * n_out + o] = s;
        }
      }
      const Activation act = l + 1 == layers() ? output_ : hidden_;
      std::vector<double> a(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) a[k] = activate(act, z[k]);
      t.z.push_back(std::move(z));
      t.a.push_back(std::move(a));
    }
    return t;
  }

  std::vector<double> operator()(std::span<const double> input) const {
    Tape t = forward(input);
    return std::move(t.a.back());
  }

  /// Reverse pass seeded with dL/dz at the output pre-activation (rows x output_dim). Accumulates
  /// dL/dtheta summed over rows into param_grad and writes the per-row dL/dinput into input_grad.
  /// Either buffer may be empty to skip it.
  void backward_from_logit(const Tape& t, std::span<const double> d_logit, std::span<double> param_grad,
                           std::span<double> input_grad) const {
    const std::size_t rows = t.rows;
    if (d_logit.size() != rows * output_dim()) throw DimensionError("output gradient has the wrong length");
    if (!param_grad.empty() && param_grad.size() != params_.size())
      throw DimensionError("parameter gradient buffer has the wrong length");
    if (!input_grad.empty() && input_grad.size() != rows * input_dim())
      throw DimensionError("input gradient buffer has the wrong length");

    std::vector<double> delta(d_logit.begin(), d_logit.end());
    std::vector<double> back;
    for (std::size_t l = layers(); l-- > 0;) {
      const std::size_t n_in = sizes_[l];
      const std::size_t n_out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* prev = t.a[l].data();
      if (!param_grad.empty()) {
        double* gw = param_grad.data() + offsets_[l];
        double* gb = gw + n_in * n_out;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* x = prev + r * n_in;
          for (std::size_t o = 0; o < n_out; ++o) {
            const double d = delta[r * n_out + o];
            double* go = gw + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) go[i] += d * x[i];
            gb[o] += d;
          }
        }
      }
      if (l == 0 && input_grad.empty()) break;
      back.assign(rows * n_in, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        double* br = back.data() + r * n_in;
        for (std::size_t o = 0; o < n_out; ++o) {
          const double d = delta[r * n_out + o];
          const double* wo = w + o * n_in;
          for (std::size_t i = 0; i < n_in; ++i) br[i] += wo[i] * d;
        }
      }
      if (l == 0) {
        std::copy(back.begin(), back.end(), input_grad.begin());
        break;
      }
      const auto& zl = t.z[l - 1];
      const auto& al = t.a[l];
      for (std::size_t k = 0; k < back.size(); ++k) back[k] *= activation_slope(hidden_, zl[k], al[k]);
      delta.swap(back);
    }
  }

  /// Reverse pass seeded with dL/d(output).
  void backward(const Tape& t, std::span<const double> d_output, std::span<double> param_grad,
                std::span<double> input_grad) const {
    std::vector<double> d(d_output.begin(), d_output.end());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= activation_slope(output_, t.z.back()[k], t.a.back()[k]);
    backward_from_logit(t, d, param_grad, input_grad);
  }

  /// Text snapshot: header line with the layer sizes and activations, then one parameter per line.
  void save(std::ostream& os) const {
    os << "mlp";
    for (std::size_t s : sizes_) os << ' ' << s;
    os << " | " << activation_name(hidden_) << ' ' << activation_name(output_) << '\n';
    char buf[32];
    for (double p : params_) {
      std::snprintf(buf, sizeof buf, "%.17g", p);
      os << buf << '\n';
    }
  }

  static Mlp load(std::istream& is) {
    std::string tag;
    is >> tag;
    if (tag != "mlp") throw std::invalid_argument("not an mlp snapshot");
    std::vector<std::size_t> sizes;
    std::string tok;
    while (is >> tok && tok != "|") sizes.push_back(std::stoul(tok));
    std::string h;
    std::string o;
    is >> h >> o;
    Mlp net(std::move(sizes), parse_activation(h), parse_activation(o));
    for (double& p : net.params_)
      if (!(is >> p)) throw std::invalid_argument("mlp snapshot is truncated");
    return net;
  }

  static Activation parse_activation(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation '" + s + "'");
  }

private:
  static double activate(Activation a, double z) {
    switch (a) {
    case Activation::identity: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return sigmoid(z);
    }
    return z;
  }

  static double activation_slope(Activation a, double z, double out) {
    switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    }
    return 1.0;
  }

  std::vector<std::size_t> sizes_;
  Activation hidden_;
  Activation output_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

} // namespace gflow
