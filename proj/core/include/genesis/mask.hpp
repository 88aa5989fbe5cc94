#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace genesis {

/// Row-major binary H×W mask.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int i, int j) { return bits[static_cast<std::size_t>(i) * width + j]; }
  std::uint8_t at(int i, int j) const { return bits[static_cast<std::size_t>(i) * width + j]; }

  std::size_t area() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  bool empty() const { return area() == 0; }
};

/// Row-major H×W integer labelling (0 conventionally marks background).
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int h, int w) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}

  int& at(int i, int j) { return labels[static_cast<std::size_t>(i) * width + j]; }
  int at(int i, int j) const { return labels[static_cast<std::size_t>(i) * width + j]; }

  /// Binary mask of every pixel carrying `label`.
  Mask mask_of(int label) const {
    Mask m(height, width);
    for (std::size_t p = 0; p < labels.size(); ++p) m.bits[p] = labels[p] == label;
    return m;
  }
};

}  // namespace genesis
