#include "alacs/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "alacs/errors.hpp"

namespace alacs {
namespace {

enum class Format { Png, Pgm, Ppm };

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

Format format_for_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return Format::Png;
  if (ext == ".pgm") return Format::Pgm;
  if (ext == ".ppm") return Format::Ppm;
  throw FormatError("unsupported image extension '" + ext + "' (use .png, .pgm or .ppm)");
}

RasterImage decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("invalid PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("16-bit PNG not supported: " + path.string());
  }
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    throw FormatError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(data));
}

// Parses the ASCII header of a binary netpbm file; returns the payload offset.
std::size_t parse_netpbm_header(const std::vector<std::uint8_t>& bytes, std::array<long, 3>& fields,
                                const std::filesystem::path& path) {
  std::size_t pos = 2;
  for (auto& field : fields) {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("malformed netpbm header: " + path.string());
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1L << 24)) throw FormatError("netpbm dimension too large: " + path.string());
      ++pos;
    }
    field = value;
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed netpbm header: " + path.string());
  return pos + 1;
}

RasterImage decode_netpbm(const std::vector<std::uint8_t>& bytes, int channels, const std::filesystem::path& path) {
  std::array<long, 3> fields{};
  const std::size_t offset = parse_netpbm_header(bytes, fields, path);
  const auto [width, height, maxval] = fields;
  if (maxval != 255) throw FormatError("only 8-bit netpbm (maxval 255) is supported: " + path.string());
  if (width < 1 || height < 1) throw FormatError("netpbm image has no pixels: " + path.string());
  const auto size = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() - offset < size) throw FormatError("truncated netpbm raster: " + path.string());
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(offset + size));
  return RasterImage(static_cast<int>(width), static_cast<int>(height), channels, std::move(data));
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void write_netpbm(const RasterImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << (img.channels() == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  const auto data = img.data();
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

RasterImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_netpbm(bytes, 1, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_netpbm(bytes, 3, path);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    throw FormatError("JPEG input rejected (lossy): " + path.string());
  }
  throw FormatError("unrecognized image format: " + path.string());
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  switch (format_for_extension(path)) {
    case Format::Png:
      write_png(img, path);
      break;
    case Format::Pgm:
      if (img.channels() != 1) throw FormatError("PGM output needs a 1-channel image");
      write_netpbm(img, path);
      break;
    case Format::Ppm:
      if (img.channels() != 3) throw FormatError("PPM output needs a 3-channel image");
      write_netpbm(img, path);
      break;
  }
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) { save_image(mask_to_image(mask), path); }

}  // namespace alacs
