#include "poolbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "poolbench/errors.hpp"

namespace poolbench {

namespace {

constexpr std::size_t kPatterns = 6;

// Pixel of pattern k at (y, x). Blob and ring are centred at (cy, cx).
double pattern(std::size_t k, double y, double x, double cy, double cx) {
  switch (k % kPatterns) {
    case 0: return std::fmod(std::floor(y / 2.0), 2.0) == 0.0 ? 1.0 : -1.0;
    case 1: return std::fmod(std::floor(x / 2.0), 2.0) == 0.0 ? 1.0 : -1.0;
    case 2: {
      const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      return 2.0 * std::exp(-r2 / 8.0) - 0.5;
    }
    case 3: {
      const int a = static_cast<int>(std::floor(y / 4.0)) + static_cast<int>(std::floor(x / 4.0));
      return a % 2 == 0 ? 1.0 : -1.0;
    }
    case 4: {
      const double r = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
      return 2.0 * std::exp(-(r - 5.0) * (r - 5.0) / 2.0) - 0.5;
    }
    default: return std::fmod(std::floor((x + y) / 3.0), 2.0) == 0.0 ? 1.0 : -1.0;
  }
}

Tensor render(std::size_t k, std::size_t h, std::size_t w, double amplitude, double cy, double cx) {
  Tensor img({1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      img.at(0, y, x) = amplitude * pattern(k, static_cast<double>(y), static_cast<double>(x), cy, cx);
  return img;
}

}  // namespace

Tensor class_template(std::size_t k, std::size_t height, std::size_t width) {
  return render(k, height, width, 1.0, (static_cast<double>(height) - 1.0) / 2.0,
                (static_cast<double>(width) - 1.0) / 2.0);
}

SyntheticDataset make_synthetic(std::size_t classes, std::size_t count, std::uint64_t seed,
                                double noise) {
  if (classes < 2 || classes > kPatterns) throw ConfigError("classes must lie in [2, 6]");
  if (count < 5 * classes) throw ConfigError("dataset needs at least 5 samples per class");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");

  SyntheticDataset data;
  data.classes = classes;
  data.noise = noise;
  data.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amplitude(0.6, 1.0);
  std::uniform_real_distribution<double> jitter(-1.5, 1.5);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  const double cy = (static_cast<double>(data.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(data.width) - 1.0) / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double a = amplitude(rng);
    const double dy = jitter(rng), dx = jitter(rng);
    Tensor img = render(labels[i], data.height, data.width, a, cy + dy, cx + dx);
    for (double& v : img.data()) v += noise * gauss(rng);
    data.images.push_back(std::move(img));
  }
  data.labels = std::move(labels);

  const std::size_t n_train = count * 4 / 5;
  data.train.resize(n_train);
  std::iota(data.train.begin(), data.train.end(), std::size_t{0});
  data.test.resize(count - n_train);
  std::iota(data.test.begin(), data.test.end(), n_train);
  return data;
}

}  // namespace poolbench
