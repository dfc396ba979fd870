#pragma once

#include "parade/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace parade {

// Named tensor container. Every parameter owns a gradient slot of the same
// shape; iteration over names is in sorted order so optimizer sweeps and
// serialization are deterministic.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Index rows, Index cols);

  bool has(const std::string& name) const { return values_.count(name) != 0; }
  const Matrix& value(const std::string& name) const;
  Matrix& value(const std::string& name);
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;

  void zero_grads();
  std::vector<std::string> names() const;
  Index parameter_count() const;

  const std::map<std::string, Matrix>& all_values() const { return values_; }

 private:
  std::map<std::string, Matrix> values_;
  std::map<std::string, Matrix> grads_;
};

// Seeded initialization: weights are truncated normal(0, 0.02) resampled
// within +-2 sigma, biases zero, layer-norm gains one. Each tensor draws from
// its own stream keyed by (seed, name), so the same seed reproduces the same
// tensor regardless of what else lives in the store.
void init_params(ParamStore& store, std::uint64_t seed, double std_dev = 0.02);

}  // namespace parade
