#pragma once

#include <filesystem>

#include "alacs/image.hpp"

namespace alacs {

/// Reads an 8-bit PNG, binary PGM (P5) or binary PPM (P6). Pixel values are
/// returned untouched. JPEG and other lossy formats are rejected.
RasterImage load_image(const std::filesystem::path& path);

/// Writes `img` in the format implied by the extension (.png, .pgm, .ppm).
void save_image(const RasterImage& img, const std::filesystem::path& path);

/// Writes a mask as a gray image with 0 -> 0 and 1 -> 255.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace alacs
