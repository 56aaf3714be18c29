#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace brp {

/// Dense row-major 2-D array. The common container behind label maps,
/// binary masks and probability maps.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      throw std::invalid_argument("Grid: negative dimension");
    }
    values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(int row, int col) { return values_[index(row, col)]; }
  const T& operator()(int row, int col) const { return values_[index(row, col)]; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool in_bounds(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool operator==(const Grid& other) const = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

/// 0 = background, k > 0 = instance k.
using InstanceMap = Grid<std::int32_t>;
using BinaryMask = Grid<std::uint8_t>;
using ProbMap = Grid<float>;

/// Nucleus-vs-background mask.
struct SemanticMask : BinaryMask {
  using BinaryMask::BinaryMask;
  SemanticMask() = default;
  explicit SemanticMask(BinaryMask m) : BinaryMask(std::move(m)) {}
};

/// Instance-boundary mask, including interfaces between touching instances.
struct BoundaryMask : BinaryMask {
  using BinaryMask::BinaryMask;
  BoundaryMask() = default;
  explicit BoundaryMask(BinaryMask m) : BinaryMask(std::move(m)) {}
};

/// Aligned semantic and boundary probability maps.
struct ProbabilityPair {
  ProbMap seg;
  ProbMap bnd;

  int height() const noexcept { return seg.height(); }
  int width() const noexcept { return seg.width(); }
  /// Throws when shapes differ or a value leaves [0, 1].
  void validate() const;
};

/// H x W x 3 interleaved real-valued image (8-bit data is kept on the 0..255 scale).
class RgbImage {
 public:
  static constexpr int kMinSide = 8;

  RgbImage() = default;
  RgbImage(int height, int width, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  float& operator()(int row, int col, int channel) { return pixels_[index(row, col, channel)]; }
  float operator()(int row, int col, int channel) const { return pixels_[index(row, col, channel)]; }

  std::span<float> pixels() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  bool all_finite() const;
  bool operator==(const RgbImage& other) const = default;

 private:
  std::size_t index(int row, int col, int channel) const noexcept {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) * 3 + static_cast<std::size_t>(channel);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

struct BBox {
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;

  int row_end() const noexcept { return row0 + height; }
  int col_end() const noexcept { return col0 + width; }
  bool operator==(const BBox&) const = default;
};

/// One connected candidate instance; `mask` covers exactly `bbox`.
struct Proposal {
  int id = 0;
  BBox bbox;
  BinaryMask mask;

  int area() const;
  bool contains(int row, int col) const {
    return row >= bbox.row0 && col >= bbox.col0 && row < bbox.row_end() && col < bbox.col_end() &&
           mask(row - bbox.row0, col - bbox.col0) != 0;
  }
};

/// Square crop window in source-image coordinates; may extend past the image.
struct Window {
  int row0 = 0;
  int col0 = 0;
  int side = 0;
  bool operator==(const Window&) const = default;
};

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()) + ")");
  }
}

}  // namespace brp
