#pragma once

// Binary PPM (P6) raster I/O and simple overlay drawing. Rasters are
// 3 x H x W tensors with values in [0, 1].

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>

#include "littleyolo/boxmath.hpp"
#include "littleyolo/error.hpp"
#include "littleyolo/tensor.hpp"
#include "littleyolo/weights.hpp"

namespace littleyolo {

namespace detail {

class PpmCursor {
 public:
  explicit PpmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    long v = 0;
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) throw FormatError("ppm: header value too large");
      ++pos_;
    }
    if (pos_ == start) throw FormatError("ppm: malformed header");
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Decodes P6 with maxval up to 65535 (two big-endian bytes per sample above
// 255). Samples are divided by maxval, so 8-bit data maps to byte / 255.
inline Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw FormatError("ppm: not a binary P6 file");
  detail::PpmCursor cur(bytes);
  cur.advance(2);
  const long width = cur.number();
  const long height = cur.number();
  const long maxval = cur.number();
  if (width < 1 || height < 1) throw FormatError("ppm: zero-dimension image");
  if (maxval < 1 || maxval > 65535) throw FormatError("ppm: invalid maxval " + std::to_string(maxval));
  if (cur.pos() >= bytes.size() || !std::isspace(bytes[cur.pos()]))
    throw FormatError("ppm: missing whitespace after header");
  cur.advance(1);
  const std::size_t sample = maxval > 255 ? 2 : 1;
  const std::size_t needed = static_cast<std::size_t>(width) * height * 3 * sample;
  if (bytes.size() - cur.pos() < needed)
    throw FormatError("ppm: truncated pixel data, expected " + std::to_string(needed) + " bytes, got " +
                      std::to_string(bytes.size() - cur.pos()));

  Tensor img(3, static_cast<int>(height), static_cast<int>(width));
  const std::uint8_t* p = bytes.data() + cur.pos();
  const float scale = static_cast<float>(maxval);
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        unsigned v = sample == 2 ? (unsigned{p[0]} << 8 | p[1]) : p[0];
        p += sample;
        img.at(c, static_cast<int>(y), static_cast<int>(x)) = static_cast<float>(v) / scale;
      }
    }
  }
  return img;
}

inline Tensor read_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline Bytes encode_ppm(const Tensor& img) {
  if (img.channels() != 3) throw ShapeError("ppm: raster must have 3 channels");
  std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
  return out;
}

inline void write_ppm(const std::filesystem::path& path, const Tensor& img) {
  write_file_bytes(path, encode_ppm(img));
}

struct Rgb {
  float r = 1.0f, g = 0.0f, b = 0.0f;
};

inline void fill_rect(Tensor& img, int x0, int y0, int x1, int y1, Rgb color) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      img.at(0, y, x) = color.r;
      img.at(1, y, x) = color.g;
      img.at(2, y, x) = color.b;
    }
}

inline void draw_box(Tensor& img, const BBox& box, Rgb color, int thickness = 2) {
  const int x1 = static_cast<int>(std::floor(box.x1)), y1 = static_cast<int>(std::floor(box.y1));
  const int x2 = static_cast<int>(std::ceil(box.x2)), y2 = static_cast<int>(std::ceil(box.y2));
  fill_rect(img, x1, y1, x2 + 1, y1 + thickness, color);
  fill_rect(img, x1, y2 - thickness + 1, x2 + 1, y2 + 1, color);
  fill_rect(img, x1, y1, x1 + thickness, y2 + 1, color);
  fill_rect(img, x2 - thickness + 1, y1, x2 + 1, y2 + 1, color);
}

namespace detail {

// 3x5 glyphs, rows top to bottom, '1' = lit.
inline std::string_view glyph(char ch) {
  struct Glyph {
    char c;
    std::string_view rows;
  };
  static constexpr std::array<Glyph, 39> table{{
      {'0', "111101101101111"}, {'1', "010110010010111"}, {'2', "111001111100111"},
      {'3', "111001111001111"}, {'4', "101101111001001"}, {'5', "111100111001111"},
      {'6', "111100111101111"}, {'7', "111001001001001"}, {'8', "111101111101111"},
      {'9', "111101111001111"}, {'a', "010101111101101"}, {'b', "110101110101110"},
      {'c', "011100100100011"}, {'d', "110101101101110"}, {'e', "111100110100111"},
      {'f', "111100110100100"}, {'g', "011100101101011"}, {'h', "101101111101101"},
      {'i', "111010010010111"}, {'j', "001001001101010"}, {'k', "101101110101101"},
      {'l', "100100100100111"}, {'m', "101111111101101"}, {'n', "110101101101101"},
      {'o', "010101101101010"}, {'p', "110101110100100"}, {'q', "010101101110011"},
      {'r', "110101110101101"}, {'s', "011100010001110"}, {'t', "111010010010010"},
      {'u', "101101101101111"}, {'v', "101101101101010"}, {'w', "101101111111101"},
      {'x', "101101010101101"}, {'y', "101101010010010"}, {'z', "111001010100111"},
      {'.', "000000000000010"}, {'-', "000000111000000"}, {' ', "000000000000000"},
  }};
  const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const auto& g : table)
    if (g.c == lower) return g.rows;
  return "111111111111111";
}

}  // namespace detail

// Burns `text` with its top-left corner at (x, y) on a filled background.
inline void draw_label(Tensor& img, int x, int y, std::string_view text, Rgb background,
                       int scale = 2) {
  const int advance = 4 * scale;
  fill_rect(img, x, y, x + advance * static_cast<int>(text.size()) + scale, y + 6 * scale, background);
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto rows = detail::glyph(text[i]);
    const int gx = x + scale + static_cast<int>(i) * advance;
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 3; ++c)
        if (rows[r * 3 + c] == '1')
          fill_rect(img, gx + c * scale, y + scale / 2 + r * scale, gx + (c + 1) * scale,
                    y + scale / 2 + (r + 1) * scale, Rgb{1.0f, 1.0f, 1.0f});
  }
}

}  // namespace littleyolo
