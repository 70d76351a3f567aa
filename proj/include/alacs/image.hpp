#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace alacs {

/// Row-major 8-bit pixel storage: one Eigen row per image row, channels
/// interleaved along the columns (width * channels entries per row).
using PixelArray = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Strided read-only view of a single channel (height x width).
using ChannelView =
    Eigen::Map<const PixelArray, Eigen::Unaligned, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

/// Axis-aligned pixel rectangle, half-open: [x, x + width) x [y, y + height).
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool operator==(const PixelRect&) const = default;
};

/// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
/// Origin is the top-left pixel; x is the column, y the row.
class RasterImage {
 public:
  RasterImage(int width, int height, int channels, std::uint8_t fill = 0);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data);
  RasterImage(int channels, PixelArray pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }

  std::span<const std::uint8_t> data() const noexcept {
    return {pixels_.data(), static_cast<std::size_t>(pixels_.size())};
  }

  const PixelArray& pixels() const noexcept { return pixels_; }
  PixelArray& pixels() noexcept { return pixels_; }

  std::uint8_t operator()(int row, int col, int channel = 0) const {
    return pixels_(row, col * channels_ + channel);
  }
  std::uint8_t& operator()(int row, int col, int channel = 0) {
    return pixels_(row, col * channels_ + channel);
  }

  ChannelView channel(int index) const;

  bool operator==(const RasterImage& other) const;

 private:
  int width_;
  int height_;
  int channels_;
  PixelArray pixels_;
};

/// Per-pixel {0,1} laser prediction, same shape as the image it came from.
class BinaryMask {
 public:
  BinaryMask(int width, int height);
  explicit BinaryMask(PixelArray values);

  int width() const noexcept { return static_cast<int>(values_.cols()); }
  int height() const noexcept { return static_cast<int>(values_.rows()); }

  const PixelArray& values() const noexcept { return values_; }

  std::uint8_t operator()(int row, int col) const { return values_(row, col); }
  void set(int row, int col, bool on) { values_(row, col) = on ? 1 : 0; }

  /// Number of set pixels.
  long count() const;

  /// True when every set pixel of *this is also set in `other`.
  bool subset_of(const BinaryMask& other) const;

  bool operator==(const BinaryMask& other) const;

 private:
  PixelArray values_;
};

/// Channel 0 of an RGB image as a single-channel image.
RasterImage red_channel(const RasterImage& img);

/// Copies a rectangle out of `img`. The rectangle is clipped to the image.
RasterImage crop(const RasterImage& img, PixelRect rect);

/// Clips `rect` to the bounds of a width x height image.
PixelRect clip_rect(PixelRect rect, int width, int height);

/// 0 -> 0, 1 -> 255 gray image.
RasterImage mask_to_image(const BinaryMask& mask);

/// Any nonzero pixel of channel 0 becomes 1.
BinaryMask image_to_mask(const RasterImage& img);

}  // namespace alacs
