#include "alacs/image.hpp"

#include <algorithm>
#include <string>

#include "alacs/errors.hpp"

namespace alacs {
namespace {

void check_shape(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw PreconditionError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw PreconditionError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  pixels_ = PixelArray::Constant(height, width * channels, fill);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  const auto expected = static_cast<std::size_t>(width) * height * channels;
  if (data.size() != expected) {
    throw PreconditionError("pixel buffer holds " + std::to_string(data.size()) + " bytes, expected " +
                            std::to_string(expected));
  }
  pixels_ = Eigen::Map<const PixelArray>(data.data(), height, width * channels);
}

RasterImage::RasterImage(int channels, PixelArray pixels)
    : width_(channels > 0 ? static_cast<int>(pixels.cols()) / channels : 0),
      height_(static_cast<int>(pixels.rows())),
      channels_(channels),
      pixels_(std::move(pixels)) {
  check_shape(width_, height_, channels_);
  if (pixels_.cols() != static_cast<Eigen::Index>(width_) * channels_) {
    throw PreconditionError("pixel array width is not a multiple of the channel count");
  }
}

ChannelView RasterImage::channel(int index) const {
  if (index < 0 || index >= channels_) {
    throw PreconditionError("channel index " + std::to_string(index) + " out of range");
  }
  return ChannelView(pixels_.data() + index, height_, width_,
                     Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(
                         static_cast<Eigen::Index>(width_) * channels_, channels_));
}

bool RasterImage::operator==(const RasterImage& other) const {
  return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_ &&
         (pixels_ == other.pixels_).all();
}

BinaryMask::BinaryMask(int width, int height) {
  if (width < 1 || height < 1) throw PreconditionError("mask dimensions must be positive");
  values_ = PixelArray::Zero(height, width);
}

BinaryMask::BinaryMask(PixelArray values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw PreconditionError("mask dimensions must be positive");
  if ((values_ > 1).any()) throw PreconditionError("mask values must be 0 or 1");
}

long BinaryMask::count() const { return values_.cast<long>().sum(); }

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (width() != other.width() || height() != other.height()) return false;
  return (values_ <= other.values_).all();
}

bool BinaryMask::operator==(const BinaryMask& other) const {
  return width() == other.width() && height() == other.height() && (values_ == other.values_).all();
}

RasterImage red_channel(const RasterImage& img) {
  if (img.channels() != 3) {
    throw PreconditionError("red_channel needs a 3-channel image, got " + std::to_string(img.channels()));
  }
  return RasterImage(1, PixelArray(img.channel(0)));
}

PixelRect clip_rect(PixelRect rect, int width, int height) {
  const int x0 = std::clamp(rect.x, 0, width);
  const int y0 = std::clamp(rect.y, 0, height);
  const int x1 = std::clamp(rect.x + rect.width, 0, width);
  const int y1 = std::clamp(rect.y + rect.height, 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

RasterImage crop(const RasterImage& img, PixelRect rect) {
  const PixelRect r = clip_rect(rect, img.width(), img.height());
  if (r.width < 1 || r.height < 1) throw PreconditionError("crop rectangle does not overlap the image");
  const int c = img.channels();
  return RasterImage(c, PixelArray(img.pixels().block(r.y, r.x * c, r.height, r.width * c)));
}

RasterImage mask_to_image(const BinaryMask& mask) {
  return RasterImage(1, PixelArray(mask.values() * std::uint8_t{255}));
}

BinaryMask image_to_mask(const RasterImage& img) {
  return BinaryMask(PixelArray((img.channel(0) > 0).cast<std::uint8_t>()));
}

}  // namespace alacs
