#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace parade {

// Central scalar choice. All model math runs in 64-bit floats; switching the
// alias switches the whole numeric core.
using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Reserved token ids; plain-word lookup never produces them.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kClsId = 1;
inline constexpr TokenId kSepId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kFirstWordId = 4;

// Invalid configuration (bad hyperparameter, inconsistent shapes in a config).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data: parse failures, invariant violations in loaded files.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure: non-finite loss, failed gradient check.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace parade
