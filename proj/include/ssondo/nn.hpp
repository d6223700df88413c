#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "ssondo/error.hpp"
#include "ssondo/random.hpp"

namespace ssondo {

enum class Activation { relu, gelu };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw UsageError("unknown activation '" + std::string(s) + "' (expected relu or gelu)");
}

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation a) {
  using Scalar = typename Derived::Scalar;
  if (a == Activation::relu) return MatrixX<Scalar>(z.cwiseMax(Scalar(0)));
  // Exact erf form.
  return MatrixX<Scalar>(z.unaryExpr([](Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  }));
}

template <typename Derived>
auto activate_grad(const Eigen::MatrixBase<Derived>& z, Activation a) {
  using Scalar = typename Derived::Scalar;
  if (a == Activation::relu) {
    return MatrixX<Scalar>(z.unaryExpr([](Scalar x) { return x > Scalar(0) ? Scalar(1) : Scalar(0); }));
  }
  return MatrixX<Scalar>(z.unaryExpr([](Scalar x) {
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
    const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    return cdf + x * pdf;
  }));
}

/// Affine map y = W x + b applied row-wise: Y = X Wᵀ + 1 bᵀ.
template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> W;  // out x in
  VectorX<Scalar> b;  // out

  Eigen::Index in_dim() const { return W.cols(); }
  Eigen::Index out_dim() const { return W.rows(); }
};

/// Mutable view of one parameter tensor, flattened.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Eigen::Map<VectorX<Scalar>> value;
};

/// Read-only view of one gradient tensor, flattened.
template <typename Scalar>
struct GradRef {
  std::string name;
  Eigen::Map<const VectorX<Scalar>> value;
};

template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;       // input to each layer
  std::vector<MatrixX<Scalar>> pre_activations;  // affine output of each hidden layer
};

template <typename Scalar>
struct MlpGrads {
  std::vector<MatrixX<Scalar>> dW;
  std::vector<VectorX<Scalar>> db;
  MatrixX<Scalar> dX;

  std::vector<GradRef<Scalar>> views(const std::string& prefix) const {
    std::vector<GradRef<Scalar>> out;
    for (std::size_t l = 0; l < dW.size(); ++l) {
      const std::string base = prefix + "." + std::to_string(l);
      out.push_back({base + ".weight", Eigen::Map<const VectorX<Scalar>>(dW[l].data(), dW[l].size())});
      out.push_back({base + ".bias", Eigen::Map<const VectorX<Scalar>>(db[l].data(), db[l].size())});
    }
    return out;
  }
};

/// Stack of dense layers with `activation` between consecutive layers (none after the last).
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<DenseLayer<Scalar>> layers, Activation activation)
      : layers_(std::move(layers)), activation_(activation) {
    if (layers_.empty()) throw UsageError("Mlp: at least one layer required");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (layer.b.size() != layer.W.rows()) throw UsageError("Mlp: bias size does not match layer output");
      if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
        throw UsageError("Mlp: layer " + std::to_string(l) + " input does not chain with previous output");
      }
    }
  }

  /// Kaiming-uniform (fan-in) weights, zero biases. dims = {in, hidden..., out}.
  static Mlp kaiming_uniform(const std::vector<int>& dims, Activation activation, std::uint64_t seed) {
    if (dims.size() < 2) throw UsageError("Mlp: need at least input and output dims");
    Rng rng(seed);
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      if (dims[l] <= 0 || dims[l + 1] <= 0) throw UsageError("Mlp: layer dims must be positive");
      DenseLayer<Scalar> layer;
      layer.W.resize(dims[l + 1], dims[l]);
      const double bound = std::sqrt(6.0 / dims[l]);
      for (Eigen::Index i = 0; i < layer.W.size(); ++i) {
        layer.W.data()[i] = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
      }
      layer.b = VectorX<Scalar>::Zero(dims[l + 1]);
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers), activation);
  }

  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  Activation activation() const { return activation_; }
  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }

  std::vector<int> dims() const {
    std::vector<int> d{static_cast<int>(in_dim())};
    for (const auto& layer : layers_) d.push_back(static_cast<int>(layer.out_dim()));
    return d;
  }

  template <typename Derived>
  MatrixX<Scalar> forward(const Eigen::MatrixBase<Derived>& X, ForwardCache<Scalar>* cache = nullptr) const {
    check_input(X.cols());
    if (cache) {
      cache->inputs.clear();
      cache->pre_activations.clear();
    }
    MatrixX<Scalar> a = X;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      MatrixX<Scalar> z = a * layer.W.transpose();
      z.rowwise() += layer.b.transpose();
      if (cache) cache->inputs.push_back(std::move(a));
      if (l + 1 == layers_.size()) return z;
      a = activate(z, activation_);
      if (cache) cache->pre_activations.push_back(std::move(z));
    }
    return a;  // unreachable
  }

  /// Reverse-mode gradients of <dY, forward(X)> for the cached forward pass.
  template <typename Derived>
  MlpGrads<Scalar> backward(const ForwardCache<Scalar>& cache, const Eigen::MatrixBase<Derived>& dY) const {
    const std::size_t L = layers_.size();
    if (cache.inputs.size() != L || cache.pre_activations.size() + 1 != L) {
      throw UsageError("Mlp::backward: cache does not come from this network's forward pass");
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (cache.inputs[l].cols() != layers_[l].in_dim() || cache.inputs[l].rows() != dY.rows()) {
        throw UsageError("Mlp::backward: stale or mismatched cache at layer " + std::to_string(l));
      }
    }
    if (dY.cols() != out_dim()) throw UsageError("Mlp::backward: dY has wrong column count");

    MlpGrads<Scalar> g;
    g.dW.resize(L);
    g.db.resize(L);
    MatrixX<Scalar> delta = dY;
    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = layers_[l];
      g.dW[l].noalias() = delta.transpose() * cache.inputs[l];
      g.db[l] = delta.colwise().sum().transpose();
      MatrixX<Scalar> upstream = delta * layer.W;
      if (l == 0) {
        g.dX = std::move(upstream);
      } else {
        delta = upstream.cwiseProduct(activate_grad(cache.pre_activations[l - 1], activation_));
      }
    }
    return g;
  }

  std::vector<ParamRef<Scalar>> parameters(const std::string& prefix) {
    std::vector<ParamRef<Scalar>> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      const std::string base = prefix + "." + std::to_string(l);
      out.push_back({base + ".weight", Eigen::Map<VectorX<Scalar>>(layer.W.data(), layer.W.size())});
      out.push_back({base + ".bias", Eigen::Map<VectorX<Scalar>>(layer.b.data(), layer.b.size())});
    }
    return out;
  }

  bool operator==(const Mlp& other) const {
    if (activation_ != other.activation_ || layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].W != other.layers_[l].W || layers_[l].b != other.layers_[l].b) return false;
    }
    return true;
  }

 private:
  void check_input(Eigen::Index cols) const {
    if (layers_.empty()) throw UsageError("Mlp: empty network");
    if (cols != in_dim()) {
      throw UsageError("Mlp: input has " + std::to_string(cols) + " columns, network expects " +
                       std::to_string(in_dim()));
    }
  }

  std::vector<DenseLayer<Scalar>> layers_;
  Activation activation_ = Activation::relu;
};

template <typename Scalar>
struct AdamState {
  std::vector<VectorX<Scalar>> m;
  std::vector<VectorX<Scalar>> v;
  std::int64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

/// Bias-corrected Adam. Moment buffers are zero-initialised on the first call.
template <typename Scalar>
void adam_step(std::type_identity_t<std::span<ParamRef<Scalar>>> params,
               std::type_identity_t<std::span<const GradRef<Scalar>>> grads, AdamState<Scalar>& state,
               std::type_identity_t<Scalar> lr) {
  if (params.size() != grads.size()) throw UsageError("adam_step: parameter and gradient counts differ");
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.push_back(VectorX<Scalar>::Zero(p.value.size()));
      state.v.push_back(VectorX<Scalar>::Zero(p.value.size()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].value.size() != params[i].value.size() || state.m[i].size() != params[i].value.size()) {
      throw UsageError("adam_step: shape mismatch for '" + params[i].name + "'");
    }
    if (!grads[i].value.allFinite()) throw NumericalError("adam_step: non-finite gradient for '" + grads[i].name + "'");
  }

  state.t += 1;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.t));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i].value;
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseAbs2();
    params[i].value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

enum class ScheduleShape { warmup_cosine, warmup_linear, constant };

inline std::string_view to_string(ScheduleShape s) {
  switch (s) {
    case ScheduleShape::warmup_cosine: return "warmup_cosine";
    case ScheduleShape::warmup_linear: return "warmup_linear";
    case ScheduleShape::constant: return "constant";
  }
  return "?";
}

inline ScheduleShape parse_schedule_shape(std::string_view s) {
  if (s == "warmup_cosine") return ScheduleShape::warmup_cosine;
  if (s == "warmup_linear") return ScheduleShape::warmup_linear;
  if (s == "constant") return ScheduleShape::constant;
  throw UsageError("unknown scheduler '" + std::string(s) + "'");
}

struct LrSchedule {
  double base_lr = 8e-4;
  std::int64_t total_steps = 1;
  double warmup_frac = 0.1;
  ScheduleShape shape = ScheduleShape::warmup_cosine;

  std::int64_t warmup_steps() const {
    const auto w = static_cast<std::int64_t>(std::floor(warmup_frac * static_cast<double>(total_steps)));
    return std::clamp<std::int64_t>(w, 0, std::max<std::int64_t>(total_steps - 1, 0));
  }
};

/// Linear ramp 0 -> base_lr over the warmup, then decay to 0 at total_steps.
inline double lr_at(const LrSchedule& s, std::int64_t step) {
  if (s.total_steps <= 0) throw UsageError("lr_at: total_steps must be positive");
  if (step < 0 || step > s.total_steps) {
    throw UsageError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  if (s.shape == ScheduleShape::constant) return s.base_lr;
  const std::int64_t warm = s.warmup_steps();
  if (step < warm) return s.base_lr * static_cast<double>(step) / static_cast<double>(warm);
  const double progress = static_cast<double>(step - warm) / static_cast<double>(s.total_steps - warm);
  if (s.shape == ScheduleShape::warmup_linear) return s.base_lr * (1.0 - progress);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ssondo
