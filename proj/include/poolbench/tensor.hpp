#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace poolbench {

// Dense row-major tensor of doubles. Shapes are [H, W], [C, H, W] or flat [n].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // 0-based element access for rank-2 and rank-3 tensors.
  double& at(std::size_t h, std::size_t w);
  double at(std::size_t h, std::size_t w) const;
  double& at(std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t c, std::size_t h, std::size_t w) const;

  // View of one channel of a [C, H, W] tensor (H*W contiguous values).
  std::span<double> channel(std::size_t c);
  std::span<const double> channel(std::size_t c) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

struct WindowSpec {
  std::size_t k1 = 2;  // window height
  std::size_t k2 = 2;  // window width
  std::size_t s1 = 2;  // vertical stride
  std::size_t s2 = 2;  // horizontal stride

  std::size_t window_size() const noexcept { return k1 * k2; }

  static WindowSpec square(std::size_t k, std::size_t s) { return {k, k, s, s}; }
};

struct OutputSize {
  std::size_t height;
  std::size_t width;
  bool operator==(const OutputSize&) const = default;
};

// Number of window placements per axis: floor((H - k1) / s1) + 1 and likewise for W.
// Trailing rows/columns that do not fill a window are dropped.
OutputSize output_size(std::size_t height, std::size_t width, const WindowSpec& spec);

// Entries of window (i, j) in row-major order. i and j are 1-based placement indices,
// window (i, j) starts at 0-based row s1*(i-1) and column s2*(j-1).
std::vector<double> extract_window(const Tensor& plane, const WindowSpec& spec, std::size_t i,
                                   std::size_t j);

// Same as extract_window for channel c of a [C, H, W] tensor, 0-based placement (row, col),
// written into `out` (size k1*k2). No allocation; used on hot paths.
void gather_window(const Tensor& x, std::size_t c, const WindowSpec& spec, std::size_t row,
                   std::size_t col, std::span<double> out);

// Flat input offsets (into x.data()) of the entries of window (row, col) of channel c.
void window_offsets(const Tensor& x, std::size_t c, const WindowSpec& spec, std::size_t row,
                    std::size_t col, std::span<std::size_t> out);

using WindowFunction = std::function<double(std::span<const double> window, std::size_t channel)>;

// Y[c, i, j] = f(window_ij(X[c]), c) for a [C, H, W] (or [H, W]) tensor.
// Exceptions thrown by f are rethrown with the (c, i, j) placement appended to the message.
Tensor map_windows(const Tensor& x, const WindowSpec& spec, const WindowFunction& f);

}  // namespace poolbench
