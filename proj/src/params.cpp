#include "parade/params.hpp"

#include "parade/rng.hpp"

namespace parade {

Matrix& ParamStore::add(const std::string& name, Index rows, Index cols) {
  if (has(name)) throw ConfigError("duplicate tensor name: " + name);
  values_[name] = Matrix::Zero(rows, cols);
  grads_[name] = Matrix::Zero(rows, cols);
  return values_[name];
}

const Matrix& ParamStore::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown tensor: " + name);
  return it->second;
}

Matrix& ParamStore::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown tensor: " + name);
  return it->second;
}

Matrix& ParamStore::grad(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ConfigError("unknown tensor: " + name);
  return it->second;
}

const Matrix& ParamStore::grad(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ConfigError("unknown tensor: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [name, v] : values_) out.push_back(name);
  return out;
}

Index ParamStore::parameter_count() const {
  Index n = 0;
  for (const auto& [name, v] : values_) n += v.size();
  return n;
}

namespace {

// Initialization class from the final path component: `b*` tensors are
// biases (zero), `g` tensors are layer-norm gains (one), everything else is
// a weight.
enum class InitKind { kWeight, kZero, kOne };

InitKind init_kind(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  if (leaf == "g") return InitKind::kOne;
  if (!leaf.empty() && leaf[0] == 'b') return InitKind::kZero;
  return InitKind::kWeight;
}

}  // namespace

void init_params(ParamStore& store, std::uint64_t seed, double std_dev) {
  for (const auto& name : store.names()) {
    Matrix& v = store.value(name);
    switch (init_kind(name)) {
      case InitKind::kZero:
        v.setZero();
        break;
      case InitKind::kOne:
        v.setOnes();
        break;
      case InitKind::kWeight: {
        SplitMix64 rng(fnv1a64(name) ^ seed);
        for (Index i = 0; i < v.rows(); ++i)
          for (Index j = 0; j < v.cols(); ++j) v(i, j) = rng.next_truncated_normal(std_dev);
        break;
      }
    }
  }
}

}  // namespace parade
