#include "lamod/nn/parameters.hpp"

#include <cmath>

#include "lamod/error.hpp"

namespace lamod::nn {

Tensor ParameterStore::add(std::string name, Tensor t) {
  if (contains(name)) throw UsageError("duplicate parameter name: " + name);
  if (!t.node()->is_leaf()) throw UsageError("parameter " + name + " must be a leaf tensor");
  t.set_requires_grad(true);
  AdamState st;
  st.m.assign(t.numel(), 0.0);
  st.v.assign(t.numel(), 0.0);
  entries_.push_back(Entry{std::move(name), t, std::move(st)});
  return t;
}

const Tensor& ParameterStore::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw UsageError("unknown parameter: " + std::string(name));
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

double ParameterStore::squared_norm() const {
  double acc = 0.0;
  for (const auto& e : entries_) {
    for (double v : e.tensor.values()) acc += v * v;
  }
  return acc;
}

void adam_update(std::span<double> p, std::span<const double> g, AdamState& st, double lr, double weight_decay,
                 const AdamParams& hp) {
  if (g.size() != p.size() || st.m.size() != p.size() || st.v.size() != p.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  st.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    st.m[k] = hp.beta1 * st.m[k] + (1.0 - hp.beta1) * g[k];
    st.v[k] = hp.beta2 * st.v[k] + (1.0 - hp.beta2) * g[k] * g[k];
    const double mh = st.m[k] / bc1;
    const double vh = st.v[k] / bc2;
    p[k] -= lr * (mh / (std::sqrt(vh) + hp.eps) + weight_decay * p[k]);
  }
}

void adam_step(ParameterStore& store, double lr, double weight_decay, const AdamParams& hp) {
  bool any = false;
  for (const auto& e : store.entries()) any = any || e.tensor.has_grad();
  if (!any) throw UsageError("adam_step: no parameter holds a gradient (call backward first)");

  for (auto& e : store.entries()) {
    adam_update(e.tensor.values(), e.tensor.grad(), e.adam, lr, weight_decay, hp);
    e.tensor.zero_grad();
  }
}

std::vector<std::string> unused_parameters(const ParameterStore& store) {
  std::vector<std::string> names;
  for (const auto& e : store.entries()) {
    bool nonzero = false;
    if (e.tensor.has_grad()) {
      for (double v : e.tensor.grad()) {
        if (v != 0.0) {
          nonzero = true;
          break;
        }
      }
    }
    if (!nonzero) names.push_back(e.name);
  }
  return names;
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace lamod::nn
