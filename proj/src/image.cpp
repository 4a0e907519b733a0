#include "mobench/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>

#include "mobench/errors.hpp"

namespace mobench {

Image::Image(int width, int height, Rgba fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * 4) {
  for (std::size_t i = 0; i < data_.size(); i += 4) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
    data_[i + 3] = fill.a;
  }
}

Rgba Image::at(int x, int y) const {
  auto i = (static_cast<std::size_t>(y) * width_ + x) * 4;
  return Rgba{data_[i], data_[i + 1], data_[i + 2], data_[i + 3]};
}

void Image::set(int x, int y, Rgba c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  auto i = (static_cast<std::size_t>(y) * width_ + x) * 4;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
  data_[i + 3] = c.a;
}

void Image::fill_rect(const Rect& r, Rgba c) {
  const int x0 = std::max(0, r.left), x1 = std::min(width_, r.right);
  const int y0 = std::max(0, r.top), y1 = std::min(height_, r.bottom);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) set(x, y, c);
}

void Image::stroke_rect(const Rect& r, int t, Rgba c) {
  fill_rect(Rect{r.left, r.top, r.right, std::min(r.bottom, r.top + t)}, c);
  fill_rect(Rect{r.left, std::max(r.top, r.bottom - t), r.right, r.bottom}, c);
  fill_rect(Rect{r.left, r.top, std::min(r.right, r.left + t), r.bottom}, c);
  fill_rect(Rect{std::max(r.left, r.right - t), r.top, r.right, r.bottom}, c);
}

// ---- font -------------------------------------------------------------------

namespace {

struct Glyph {
  char ch;
  std::array<const char*, kGlyphH> rows;
};

// clang-format off
constexpr Glyph kFont[] = {
  {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
  {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
  {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
  {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
  {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
  {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
  {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
  {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
  {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
  {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
  {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
  {'D', {"###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."}},
  {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
  {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
  {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"}},
  {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
  {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
  {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
  {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
  {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
  {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
  {'N', {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"}},
  {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
  {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
  {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
  {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
  {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
  {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
  {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
  {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
  {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
  {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
  {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
  {' ', {".....", ".....", ".....", ".....", ".....", ".....", "....."}},
  {'.', {".....", ".....", ".....", ".....", ".....", ".##..", ".##.."}},
  {',', {".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."}},
  {':', {".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."}},
  {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
  {'/', {".....", "....#", "...#.", "..#..", ".#...", "#....", "....."}},
  {'%', {"##...", "##..#", "...#.", "..#..", ".#...", "#..##", "...##"}},
  {'+', {".....", "..#..", "..#..", "#####", "..#..", "..#..", "....."}},
  {'(', {"...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."}},
  {')', {".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."}},
};
// clang-format on

constexpr std::array<const char*, kGlyphH> kUnknown = {"#####", "#...#", "#...#", "#...#", "#...#", "#...#", "#####"};

const std::array<const char*, kGlyphH>& glyph_for(char c) {
  char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.ch == up) return g.rows;
  return kUnknown;
}

std::size_t glyph_count(std::string_view text) {
  std::size_t n = 0;
  for (char c : text)
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace

int text_width(std::string_view text, int scale) {
  auto n = static_cast<int>(glyph_count(text));
  return n == 0 ? 0 : (n * (kGlyphW + 1) - 1) * scale;
}

void draw_text(Image& img, int x, int y, std::string_view text, int scale, Rgba color) {
  int pen = x;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto u = static_cast<unsigned char>(text[i]);
    if ((u & 0xC0) == 0x80) continue;
    const auto& rows = glyph_for(u < 0x80 ? text[i] : '\x01');
    for (int gy = 0; gy < kGlyphH; ++gy)
      for (int gx = 0; gx < kGlyphW; ++gx)
        if (rows[gy][gx] == '#') img.fill_rect(Rect{pen + gx * scale, y + gy * scale, pen + (gx + 1) * scale, y + (gy + 1) * scale}, color);
    pen += (kGlyphW + 1) * scale;
  }
}

// ---- codecs -----------------------------------------------------------------

std::vector<std::uint8_t> encode_png(const Image& img) {
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width());
  pi.height = static_cast<png_uint_32>(img.height());
  pi.format = PNG_FORMAT_RGBA;
  // Worst-case bound, so the image is compressed once.
  std::vector<std::uint8_t> out(PNG_IMAGE_PNG_SIZE_MAX(pi));
  png_alloc_size_t size = out.size();
  if (!png_image_write_to_memory(&pi, out.data(), &size, 0, img.pixels().data(), 0, nullptr))
    throw Error(ErrorKind::kIo, std::string("png encode failed: ") + pi.message);
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image pi;
  std::memset(&pi, 0, sizeof pi);
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
    throw Error(ErrorKind::kIo, std::string("png header: ") + pi.message);
  pi.format = PNG_FORMAT_RGBA;
  Image img(static_cast<int>(pi.width), static_cast<int>(pi.height));
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr))
    throw Error(ErrorKind::kIo, std::string("png decode: ") + pi.message);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      auto i = (static_cast<std::size_t>(y) * img.width() + x) * 4;
      img.set(x, y, Rgba{buf[i], buf[i + 1], buf[i + 2], buf[i + 3]});
    }
  return img;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_encode(std::string_view s) {
  return base64_encode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace mobench
