#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lamod/nn/tensor.hpp"

namespace lamod::nn {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named, ordered set of trainable tensors with per-parameter Adam moments.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    AdamState adam;
  };

  // Registers a parameter (forced to require gradients). Names are unique.
  Tensor add(std::string name, Tensor t);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();
  // Sum of squared parameter values, i.e. the L2 weight-decay penalty.
  double squared_norm() const;

 private:
  std::vector<Entry> entries_;
};

// Adam update of one flat array in place; advances st.step.
void adam_update(std::span<double> p, std::span<const double> g, AdamState& st, double learning_rate,
                 double weight_decay, const AdamParams& hp = {});

// One Adam update on every parameter: p -= lr * (m_hat / (sqrt(v_hat) + eps)
// + weight_decay * p). Parameters that received no gradient use zero. Throws
// UsageError when no parameter in the store holds a gradient. Clears grads.
void adam_step(ParameterStore& store, double learning_rate, double weight_decay, const AdamParams& hp = {});

// Names of parameters whose gradient is identically zero (or absent).
std::vector<std::string> unused_parameters(const ParameterStore& store);

// Kaiming-uniform values for a tensor with the given fan-in.
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace lamod::nn
