#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vilas {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Packed 8-bit RGB image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, Rgb fill = {});

  Rgb at(int x, int y) const {
    const auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear resample with half-pixel centers:
///   src = (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to the edge,
/// rounded to nearest. Aspect ratio is not preserved.
Image resize_bilinear(const Image& src, int width, int height);

std::string encode_png(const Image& image);
Image decode_png(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
inline std::string base64_encode(std::string_view s) {
  return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}
std::string base64_decode(std::string_view text);

}  // namespace vilas
