#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ios>
#include <sstream>
#include <string>
#include <vector>

#include "edgesched/error.hpp"
#include "edgesched/rng.hpp"

namespace edgesched::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Layer {
  Matrix weight;  // (out, in)
  Vector bias;    // (out)
};

/// Activations saved by `forward`, consumed by `backward`.
///
/// Samples are columns. `inputs[l]` is the input to layer l and
/// `pre[l]` its affine output before the activation.
struct Cache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  std::uint64_t version = 0;
  const void* owner = nullptr;
};

struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  void scale(double k) {
    for (auto& w : weight) w *= k;
    for (auto& b : bias) b *= k;
  }
  void add(const Gradients& o) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] += o.weight[l];
      bias[l] += o.bias[l];
    }
  }
};

/// Fully connected network: ReLU on hidden layers, identity on the output.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw ValidationError("an MLP needs at least input and output dims");
    for (int d : dims_) {
      if (d < 1) throw ValidationError("layer dims must be >= 1");
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      layers_.push_back(Layer{Matrix::Zero(dims_[l + 1], dims_[l]), Vector::Zero(dims_[l + 1])});
    }
  }

  /// He-style uniform init, bound sqrt(6 / fan_in); zero biases.
  Mlp(std::vector<int> dims, std::uint64_t seed) : Mlp(std::move(dims)) {
    Rng rng(seed);
    for (auto& layer : layers_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
          layer.weight(i, j) = (2.0 * uniform01(rng) - 1.0) * bound;
        }
      }
    }
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_size() const { return dims_.front(); }
  int output_size() const { return dims_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Mutable access bumps the version so outstanding caches become stale.
  std::vector<Layer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  std::uint64_t version() const { return version_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Batched forward pass; `x` holds one sample per column.
  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.rows() != dims_.front()) {
      throw ValidationError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                            std::to_string(dims_.front()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
      cache->version = version_;
      cache->owner = this;
    }
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * h;
      z.colwise() += layers_[l].bias;
      if (cache) {
        cache->inputs.push_back(h);
        cache->pre.push_back(z);
      }
      h = (l + 1 < layers_.size()) ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  Vector forward(const Vector& x, Cache* cache = nullptr) const {
    return forward(Matrix(x), cache).col(0);
  }

  Vector forward(const std::vector<double>& x) const {
    return forward(Vector(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()))));
  }

  /// Reverse-mode pass. Parameter gradients are summed over the batch
  /// columns; `grad_x` receives d/dx when non-null.
  Gradients backward(const Cache& cache, const Matrix& grad_y, Matrix* grad_x = nullptr) const {
    if (cache.owner != this || cache.version != version_ || cache.pre.size() != layers_.size()) {
      throw StateError("backward called with a stale or foreign forward cache");
    }
    if (grad_y.rows() != dims_.back() || grad_y.cols() != cache.pre.back().cols()) {
      throw ValidationError("grad_y shape does not match the cached forward pass");
    }
    Gradients g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = grad_y;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l + 1 < layers_.size()) {
        delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
      }
      g.weight[l] = delta * cache.inputs[l].transpose();
      g.bias[l] = delta.rowwise().sum();
      if (l > 0 || grad_x) delta = layers_[l].weight.transpose() * delta;
    }
    if (grad_x) *grad_x = delta;
    return g;
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
      g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  void copy_parameters_from(const Mlp& other) {
    if (other.dims_ != dims_) throw ValidationError("cannot copy parameters between different shapes");
    layers_ = other.layers_;
    ++version_;
  }

  bool operator==(const Mlp& o) const {
    if (dims_ != o.dims_) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].weight != o.layers_[l].weight || layers_[l].bias != o.layers_[l].bias) return false;
    }
    return true;
  }

 private:
  std::vector<int> dims_;
  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
};

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or Adam (with bias correction) over an Mlp's parameters.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const Mlp& net, OptimizerConfig config) : config_(config) {
    if (config_.kind == OptimizerConfig::Kind::kAdam) {
      m_ = net.zero_gradients();
      v_ = net.zero_gradients();
    }
  }

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return t_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  void step(Mlp& net, const Gradients& grads) {
    auto& layers = net.mutable_layers();
    if (grads.weight.size() != layers.size()) throw ValidationError("gradient/parameter layer count mismatch");
    ++t_;
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerConfig::Kind::kSgd) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight -= lr * grads.weight[l];
        layers[l].bias -= lr * grads.bias[l];
      }
      return;
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, grads.weight[l], m_.weight[l], v_.weight[l]);
      update(layers[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
    }
  }

 private:
  OptimizerConfig config_;
  Gradients m_;
  Gradients v_;
  std::int64_t t_ = 0;
};

inline constexpr int kModelFormatVersion = 1;

/// Text model file; parameters are written as hex floats so that
/// load(save(m)) is bit-exact.
inline void save_model(const Mlp& net, std::ostream& out) {
  out << "edgesched-mlp " << kModelFormatVersion << "\n";
  out << "dims " << net.dims().size();
  for (int d : net.dims()) out << ' ' << d;
  out << "\n" << std::hexfloat;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layers()[l];
    out << "layer " << l << "\n";
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) out << (j ? " " : "") << layer.weight(i, j);
      out << "\n";
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out << (i ? " " : "") << layer.bias(i);
    out << "\n";
  }
  out << std::defaultfloat;
}

inline void save_model(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_model(net, out);
}

namespace detail {
inline double read_hexfloat(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("model file truncated");
  // libstdc++ cannot stream hexfloats back in; strtod can.
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw ParseError("bad number in model file: " + tok);
  return v;
}
}  // namespace detail

inline Mlp load_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "edgesched-mlp") throw ParseError("not an edgesched model file");
  if (version != kModelFormatVersion) throw ParseError("unsupported model format version " + std::to_string(version));
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "dims") throw ParseError("model file: missing dims");
  std::vector<int> dims(n);
  for (auto& d : dims) {
    if (!(in >> d)) throw ParseError("model file: bad dims");
  }
  Mlp net(dims);
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::size_t idx = 0;
    if (!(in >> tag >> idx) || tag != "layer" || idx != l) throw ParseError("model file: bad layer header");
    for (Eigen::Index i = 0; i < layers[l].weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layers[l].weight.cols(); ++j) layers[l].weight(i, j) = detail::read_hexfloat(in);
    }
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) layers[l].bias(i) = detail::read_hexfloat(in);
  }
  return net;
}

inline Mlp load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace edgesched::nn
