#include "poolbench/tensor.hpp"

#include <numeric>
#include <string>

#include "poolbench/errors.hpp"

namespace poolbench {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
    n *= d;
  }
  return n;
}

// Row and column axes of a rank-2 or rank-3 tensor.
std::pair<std::size_t, std::size_t> spatial_dims(const Tensor& x) {
  if (x.rank() == 2) return {x.dim(0), x.dim(1)};
  if (x.rank() == 3) return {x.dim(1), x.dim(2)};
  throw ShapeError("windowing expects a [H, W] or [C, H, W] tensor, got rank " +
                   std::to_string(x.rank()));
}

std::size_t channel_count(const Tensor& x) { return x.rank() == 3 ? x.dim(0) : 1; }

template <typename E>
[[noreturn]] void rethrow_at(const E& e, std::size_t c, std::size_t i, std::size_t j) {
  throw E(std::string(e.what()) + " (at channel " + std::to_string(c) + ", window " +
          std::to_string(i) + "," + std::to_string(j) + ")");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(checked_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape product " + std::to_string(checked_product(shape_)));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw IndexError("axis " + std::to_string(axis) + " out of range");
  return shape_[axis];
}

double& Tensor::at(std::size_t h, std::size_t w) { return data_[h * shape_[1] + w]; }
double Tensor::at(std::size_t h, std::size_t w) const { return data_[h * shape_[1] + w]; }

double& Tensor::at(std::size_t c, std::size_t h, std::size_t w) {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}
double Tensor::at(std::size_t c, std::size_t h, std::size_t w) const {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}

std::span<double> Tensor::channel(std::size_t c) {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<double>(data_).subspan(c * plane, plane);
}
std::span<const double> Tensor::channel(std::size_t c) const {
  const std::size_t plane = shape_[1] * shape_[2];
  return std::span<const double>(data_).subspan(c * plane, plane);
}

OutputSize output_size(std::size_t height, std::size_t width, const WindowSpec& spec) {
  if (spec.k1 == 0 || spec.k2 == 0 || spec.s1 == 0 || spec.s2 == 0) {
    throw ShapeError("window sizes and strides must be positive");
  }
  if (height < spec.k1) {
    throw ShapeError("height " + std::to_string(height) + " is smaller than window height " +
                     std::to_string(spec.k1));
  }
  if (width < spec.k2) {
    throw ShapeError("width " + std::to_string(width) + " is smaller than window width " +
                     std::to_string(spec.k2));
  }
  return {(height - spec.k1) / spec.s1 + 1, (width - spec.k2) / spec.s2 + 1};
}

std::vector<double> extract_window(const Tensor& plane, const WindowSpec& spec, std::size_t i,
                                   std::size_t j) {
  if (plane.rank() != 2) throw ShapeError("extract_window expects a [H, W] tensor");
  const auto out = output_size(plane.dim(0), plane.dim(1), spec);
  if (i < 1 || i > out.height || j < 1 || j > out.width) {
    throw IndexError("window (" + std::to_string(i) + "," + std::to_string(j) +
                     ") outside 1.." + std::to_string(out.height) + " x 1.." +
                     std::to_string(out.width));
  }
  std::vector<double> window(spec.window_size());
  const std::size_t r0 = spec.s1 * (i - 1);
  const std::size_t c0 = spec.s2 * (j - 1);
  std::size_t n = 0;
  for (std::size_t a = 0; a < spec.k1; ++a)
    for (std::size_t b = 0; b < spec.k2; ++b) window[n++] = plane.at(r0 + a, c0 + b);
  return window;
}

void window_offsets(const Tensor& x, std::size_t c, const WindowSpec& spec, std::size_t row,
                    std::size_t col, std::span<std::size_t> out) {
  const auto [h, w] = spatial_dims(x);
  const std::size_t base = c * h * w + row * spec.s1 * w + col * spec.s2;
  std::size_t n = 0;
  for (std::size_t a = 0; a < spec.k1; ++a)
    for (std::size_t b = 0; b < spec.k2; ++b) out[n++] = base + a * w + b;
}

void gather_window(const Tensor& x, std::size_t c, const WindowSpec& spec, std::size_t row,
                   std::size_t col, std::span<double> out) {
  const auto [h, w] = spatial_dims(x);
  const double* src = x.data().data() + c * h * w + row * spec.s1 * w + col * spec.s2;
  std::size_t n = 0;
  for (std::size_t a = 0; a < spec.k1; ++a)
    for (std::size_t b = 0; b < spec.k2; ++b) out[n++] = src[a * w + b];
}

Tensor map_windows(const Tensor& x, const WindowSpec& spec, const WindowFunction& f) {
  const auto [h, w] = spatial_dims(x);
  const auto out = output_size(h, w, spec);
  const std::size_t channels = channel_count(x);
  Tensor y = x.rank() == 3 ? Tensor({channels, out.height, out.width})
                           : Tensor({out.height, out.width});
  std::vector<double> window(spec.window_size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < out.height; ++i) {
      for (std::size_t j = 0; j < out.width; ++j, ++k) {
        gather_window(x, c, spec, i, j, window);
        try {
          y[k] = f(window, c);
        } catch (const ShapeError& e) {
          rethrow_at(e, c, i + 1, j + 1);
        } catch (const ParameterError& e) {
          rethrow_at(e, c, i + 1, j + 1);
        } catch (const ConfigError& e) {
          rethrow_at(e, c, i + 1, j + 1);
        } catch (const IndexError& e) {
          rethrow_at(e, c, i + 1, j + 1);
        }
      }
    }
  }
  return y;
}

}  // namespace poolbench
