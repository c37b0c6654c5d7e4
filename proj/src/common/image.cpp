#include "vilas/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>

#include "vilas/error.hpp"

namespace vilas {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill.r;
    data[i + 1] = fill.g;
    data[i + 2] = fill.b;
  }
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (width <= 0 || height <= 0 || src.width <= 0 || src.height <= 0) {
    throw Error(Errc::invalid_argument, "resize_bilinear: empty image");
  }
  Image out(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n, int src_n, double scale) {
    std::vector<Tap> t(n);
    for (int i = 0; i < n; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src_n - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, src_n - 1);
      t[i] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto xt = taps(width, src.width, sx);
  const auto yt = taps(height, src.height, sy);

  for (int y = 0; y < height; ++y) {
    const auto& ty = yt[y];
    const auto* r0 = &src.data[static_cast<std::size_t>(ty.i0) * src.width * 3];
    const auto* r1 = &src.data[static_cast<std::size_t>(ty.i1) * src.width * 3];
    auto* dst = &out.data[static_cast<std::size_t>(y) * width * 3];
    for (int x = 0; x < width; ++x) {
      const auto& tx = xt[x];
      for (int c = 0; c < 3; ++c) {
        const double top = r0[tx.i0 * 3 + c] * (1.0 - tx.f) + r0[tx.i1 * 3 + c] * tx.f;
        const double bot = r1[tx.i0 * 3 + c] * (1.0 - tx.f) + r1[tx.i1 * 3 + c] * tx.f;
        const double v = top * (1.0 - ty.f) + bot * ty.f;
        dst[x * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

std::string encode_png(const Image& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.data.data(), 0, nullptr)) {
    throw Error(Errc::io, std::string("png encode failed: ") + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.data.data(), 0, nullptr)) {
    throw Error(Errc::io, std::string("png encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::string_view bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(Errc::io, std::string("png decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(Errc::io, std::string("png decode failed: ") + png.message);
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::protocol, "base64: length not a multiple of 4");
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::protocol, "base64: invalid input");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace vilas
