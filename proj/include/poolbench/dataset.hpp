#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "poolbench/tensor.hpp"

namespace poolbench {

// Procedural K-class image set. Class k draws from pattern k mod 6:
// horizontal bars, vertical bars, blob, checker, ring, diagonal bars.
struct SyntheticDataset {
  std::size_t classes = 0;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::vector<Tensor> images;       // each [1, H, W]
  std::vector<std::size_t> labels;  // in [0, classes)
  std::vector<std::size_t> train;   // indices into images, 80%
  std::vector<std::size_t> test;    // remaining 20%, disjoint from train
};

SyntheticDataset make_synthetic(std::size_t classes, std::size_t count, std::uint64_t seed,
                                double noise = 1.75);

// Noise-free pattern of class `k`: amplitude 1, no jitter.
Tensor class_template(std::size_t k, std::size_t height = 16, std::size_t width = 16);

}  // namespace poolbench
