#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poolbench {

// Shapes that do not fit together (window larger than input, length mismatch).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Window placement or element index outside the valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Parameter value outside its domain (r <= 0, non-simplex ordinal weights, NaN input).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent block or network configuration (SE ratio not dividing C, unknown method).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss during training.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace poolbench
