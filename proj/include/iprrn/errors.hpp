#pragma once

#include <stdexcept>

namespace iprrn {

/// Invalid hyperparameters, or components whose shapes do not agree.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad input data: missing files, too few frames, indivisible dimensions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iprrn
