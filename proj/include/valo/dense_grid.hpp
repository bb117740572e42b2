#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace valo {

// Row-major dense H x W x C tensor of doubles.
struct DenseGrid2D {
  int height = 0, width = 0, channels = 0;
  std::vector<double> data;

  DenseGrid2D() = default;
  DenseGrid2D(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, 0.0) {
    if (h < 0 || w < 0 || c <= 0)
      throw std::invalid_argument("dense grid: bad dimensions");
  }

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size() const { return data.size(); }
};

} // namespace valo
