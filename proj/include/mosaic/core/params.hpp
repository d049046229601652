#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mosaic/core/graph.hpp"
#include "mosaic/core/rng.hpp"

namespace mosaic::nn {

using ParamId = int32_t;

template <class T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> adam_m;
    Tensor<T> adam_v;
    bool trainable = true;
  };

  ParamId add(const std::string& name, Tensor<T> init, bool trainable = true) {
    check(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor<T>::zeros(init.shape());
    e.adam_m = Tensor<T>::zeros(init.shape());
    e.adam_v = Tensor<T>::zeros(init.shape());
    e.value = std::move(init);
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    ParamId id = static_cast<ParamId>(entries_.size() - 1);
    index_[name] = id;
    return id;
  }

  int size() const { return static_cast<int>(entries_.size()); }
  Entry& entry(ParamId id) { return entries_[id]; }
  const Entry& entry(ParamId id) const { return entries_[id]; }
  Tensor<T>& value(ParamId id) { return entries_[id].value; }
  const Tensor<T>& value(ParamId id) const { return entries_[id].value; }

  ParamId find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? ParamId(-1) : it->second;
  }

  int64_t total_params() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill_(T(0));
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, ParamId> index_;
};

// Per-graph binding of parameters to leaf vars. Parameters enter a graph at
// most once; after backward the node gradients are folded into the store.
template <class T>
class BoundParams {
 public:
  BoundParams(Graph<T>& g, ParameterStore<T>& store)
      : g_(&g), store_(&store), vars_(store.size(), -1) {}

  Var operator()(ParamId id) {
    if (vars_[id] < 0) vars_[id] = g_->leaf(store_->value(id), store_->entry(id).trainable);
    return vars_[id];
  }

  void accumulate_grads() {
    for (ParamId id = 0; id < static_cast<ParamId>(vars_.size()); ++id) {
      if (vars_[id] < 0) continue;
      if (g_->has_grad(vars_[id])) store_->entry(id).grad.add_(g_->grad(vars_[id]));
    }
  }

 private:
  Graph<T>* g_;
  ParameterStore<T>* store_;
  std::vector<Var> vars_;
};

// ------------------------------------------------------------------- adam

template <class T>
struct AdamConfig {
  T lr = T(5e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T grad_clip = T(10);  // global norm; <= 0 disables
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig<T> cfg = {}) : cfg_(cfg) {}

  // Returns the pre-clip global gradient norm.
  T step(ParameterStore<T>& store) {
    ++t_;
    double sq = 0;
    for (auto& e : store.entries()) {
      if (!e.trainable) continue;
      sq += static_cast<double>(e.grad.vec().squaredNorm());
    }
    T gnorm = static_cast<T>(std::sqrt(sq));
    T clip = T(1);
    if (cfg_.grad_clip > T(0) && gnorm > cfg_.grad_clip) clip = cfg_.grad_clip / gnorm;
    T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (auto& e : store.entries()) {
      if (!e.trainable) continue;
      T* g = e.grad.data();
      T* m = e.adam_m.data();
      T* v = e.adam_v.data();
      T* w = e.value.data();
      for (int64_t i = 0; i < e.value.numel(); ++i) {
        T gi = g[i] * clip;
        m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * gi * gi;
        T mhat = m[i] / bc1;
        T vhat = v[i] / bc2;
        w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    return gnorm;
  }

  int64_t steps() const { return t_; }
  AdamConfig<T>& config() { return cfg_; }

 private:
  AdamConfig<T> cfg_;
  int64_t t_ = 0;
};

// -------------------------------------------------------------------- ema

// target <- m * target + (1 - m) * online, matched by name. Entries present
// only on one side are ignored.
template <class T>
void ema_update(ParameterStore<T>& target, const ParameterStore<T>& online, T m_ema) {
  check(m_ema >= T(0) && m_ema <= T(1), "ema momentum outside [0,1]");
  for (auto& te : target.entries()) {
    for (const auto& oe : online.entries()) {
      if (oe.name != te.name) continue;
      check(oe.value.shape() == te.value.shape(), "ema shape mismatch for " + te.name);
      te.value.vec() = m_ema * te.value.vec() + (T(1) - m_ema) * oe.value.vec();
      break;
    }
  }
}

// ------------------------------------------------------------- checkpoint io

// Self-describing container: magic, scalar width, JSON metadata block, then
// named raw arrays. Round-trips bit-exactly.
namespace ckpt {

struct NamedArrayRef {
  std::string name;
  const void* data;
  Shape shape;
};

template <class T>
void save(const std::string& path, const std::string& meta_json,
          const std::vector<std::pair<std::string, const Tensor<T>*>>& arrays) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  check(f.good(), "cannot open checkpoint for write: " + path);
  const char magic[8] = {'M', 'S', 'C', 'K', 'P', 'T', '0', '1'};
  f.write(magic, 8);
  uint32_t sw = sizeof(T);
  f.write(reinterpret_cast<const char*>(&sw), 4);
  uint64_t ml = meta_json.size();
  f.write(reinterpret_cast<const char*>(&ml), 8);
  f.write(meta_json.data(), static_cast<std::streamsize>(ml));
  uint64_t n = arrays.size();
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& [name, t] : arrays) {
    uint32_t nl = static_cast<uint32_t>(name.size());
    f.write(reinterpret_cast<const char*>(&nl), 4);
    f.write(name.data(), nl);
    uint32_t rank = static_cast<uint32_t>(t->rank());
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t d = static_cast<uint64_t>(t->shape()[static_cast<int>(i)]);
      f.write(reinterpret_cast<const char*>(&d), 8);
    }
    f.write(reinterpret_cast<const char*>(t->data()),
            static_cast<std::streamsize>(sizeof(T) * t->numel()));
  }
  check(f.good(), "checkpoint write failed: " + path);
}

template <class T>
struct Loaded {
  std::string meta_json;
  std::vector<std::pair<std::string, Tensor<T>>> arrays;

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : arrays)
      if (n == name) return &t;
    return nullptr;
  }
};

template <class T>
Loaded<T> load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  check(f.good() && std::memcmp(magic, "MSCKPT01", 8) == 0, "bad checkpoint magic: " + path);
  uint32_t sw = 0;
  f.read(reinterpret_cast<char*>(&sw), 4);
  check(sw == sizeof(T), "checkpoint scalar width mismatch");
  uint64_t ml = 0;
  f.read(reinterpret_cast<char*>(&ml), 8);
  Loaded<T> out;
  out.meta_json.resize(ml);
  f.read(out.meta_json.data(), static_cast<std::streamsize>(ml));
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), 8);
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t nl = 0;
    f.read(reinterpret_cast<char*>(&nl), 4);
    std::string name(nl, '\0');
    f.read(name.data(), nl);
    uint32_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 4);
    Shape s;
    std::vector<int64_t> dims(rank);
    for (uint32_t r = 0; r < rank; ++r) {
      uint64_t d = 0;
      f.read(reinterpret_cast<char*>(&d), 8);
      dims[r] = static_cast<int64_t>(d);
    }
    switch (rank) {
      case 1: s = Shape{dims[0]}; break;
      case 2: s = Shape{dims[0], dims[1]}; break;
      case 3: s = Shape{dims[0], dims[1], dims[2]}; break;
      case 4: s = Shape{dims[0], dims[1], dims[2], dims[3]}; break;
      case 5: s = Shape{dims[0], dims[1], dims[2], dims[3], dims[4]}; break;
      default: check(false, "checkpoint rank unsupported");
    }
    Tensor<T> t(s);
    f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(T) * t.numel()));
    out.arrays.emplace_back(std::move(name), std::move(t));
  }
  check(f.good(), "checkpoint truncated: " + path);
  return out;
}

}  // namespace ckpt

// ----------------------------------------------------------------- inits

template <class T>
Tensor<T> he_normal(Shape s, int64_t fan_in, Rng& rng) {
  return Tensor<T>::randn(s, rng, static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in))));
}

template <class T>
Tensor<T> xavier_uniform(Shape s, int64_t fan_in, int64_t fan_out, Rng& rng, double gain = 1.0) {
  double b = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor<T>::uniform(s, rng, static_cast<T>(-b), static_cast<T>(b));
}

}  // namespace mosaic::nn
