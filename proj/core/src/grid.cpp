#include "brp/grid.hpp"

#include <algorithm>
#include <cmath>

namespace brp {

void ProbabilityPair::validate() const {
  require_same_shape(seg, bnd, "ProbabilityPair");
  auto in_unit = [](float v) { return v >= 0.0f && v <= 1.0f; };
  if (!std::all_of(seg.begin(), seg.end(), in_unit) ||
      !std::all_of(bnd.begin(), bnd.end(), in_unit)) {
    throw std::invalid_argument("ProbabilityPair: values must lie in [0, 1]");
  }
}

RgbImage::RgbImage(int height, int width, float fill) : height_(height), width_(width) {
  if (height < kMinSide || width < kMinSide) {
    throw std::invalid_argument("RgbImage: height and width must be >= 8, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3, fill);
}

bool RgbImage::all_finite() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [](float v) { return std::isfinite(v); });
}

int Proposal::area() const {
  return static_cast<int>(std::count_if(mask.begin(), mask.end(), [](auto v) { return v != 0; }));
}

}  // namespace brp
