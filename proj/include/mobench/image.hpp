#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mobench/ui_tree.hpp"

namespace mobench {

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  bool operator==(const Rgba&) const = default;
};

// 8-bit RGBA raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgba fill = {255, 255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  std::span<const std::uint8_t> pixels() const { return data_; }

  Rgba at(int x, int y) const;
  void set(int x, int y, Rgba c);

  // All drawing clips to the image.
  void fill_rect(const Rect& r, Rgba c);
  void stroke_rect(const Rect& r, int thickness, Rgba c);

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Fixed 5x7 bitmap font; glyph cells are 6x8 units including spacing.
inline constexpr int kGlyphW = 5;
inline constexpr int kGlyphH = 7;

// Pixel size of `text` drawn at integer `scale`.
int text_width(std::string_view text, int scale);
inline int text_height(int scale) { return kGlyphH * scale; }
void draw_text(Image& img, int x, int y, std::string_view text, int scale, Rgba color);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view s);

}  // namespace mobench
