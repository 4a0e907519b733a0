#include "mobench/som_overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mobench/errors.hpp"

namespace mobench {

namespace {

constexpr std::array<Rgba, kSomPaletteSize> kPalette = {{
    {230, 25, 75, 255},
    {60, 180, 75, 255},
    {0, 130, 200, 255},
    {245, 130, 48, 255},
    {145, 30, 180, 255},
    {70, 240, 240, 255},
    {240, 50, 230, 255},
    {128, 128, 0, 255},
}};

// Styling is specified at a 1080 px wide reference.
constexpr double kRefWidth = 1080.0;
constexpr int kOutlinePx = 3;
constexpr int kLabelPx = 28;

Rgba ink_for(Rgba bg) {
  const int luma = (299 * bg.r + 587 * bg.g + 114 * bg.b) / 1000;
  return luma > 150 ? Rgba{0, 0, 0, 255} : Rgba{255, 255, 255, 255};
}

}  // namespace

Rgba som_color(int index) { return kPalette[static_cast<std::size_t>(index % kSomPaletteSize)]; }

SomImage render_som(const Image& screenshot, const CompressedView& view, Image* marked) {
  if (view.source && (view.source->screen_width != screenshot.width() ||
                      view.source->screen_height != screenshot.height()))
    throw Error(ErrorKind::kDimensionMismatch,
                "screenshot " + std::to_string(screenshot.width()) + "x" + std::to_string(screenshot.height()) +
                    " vs tree " + std::to_string(view.source->screen_width) + "x" +
                    std::to_string(view.source->screen_height));

  Image img = screenshot;
  const double s = img.width() / kRefWidth;
  const int outline = std::max(1, static_cast<int>(std::lround(kOutlinePx * s)));
  const int glyph = std::max(1, static_cast<int>(std::lround(kLabelPx * s / kGlyphH)));
  const int pad = std::max(1, glyph);

  SomImage out;
  for (const auto& e : view.elements) {
    const Rgba color = som_color(e.index);
    img.stroke_rect(e.bounds, outline, color);

    const std::string number = std::to_string(e.index);
    const int tw = std::min(img.width(), text_width(number, glyph) + 2 * pad);
    const int th = std::min(img.height(), text_height(glyph) + 2 * pad);
    const int x = std::clamp(e.bounds.left, 0, img.width() - tw);
    const int y = std::clamp(e.bounds.top, 0, img.height() - th);
    const Rect tag{x, y, x + tw, y + th};
    img.fill_rect(tag, color);
    draw_text(img, x + pad, y + pad, number, glyph, ink_for(color));

    out.legend.push_back(LegendEntry{e.index, e.bounds, e.label, tag});
  }
  out.png = encode_png(img);
  if (marked) *marked = std::move(img);
  return out;
}

nlohmann::json legend_to_json(const std::vector<LegendEntry>& legend) {
  auto arr = nlohmann::json::array();
  for (const auto& e : legend) {
    arr.push_back({{"index", e.index},
                   {"bounds", {e.bounds.left, e.bounds.top, e.bounds.right, e.bounds.bottom}},
                   {"label", e.label},
                   {"tag", {e.tag.left, e.tag.top, e.tag.right, e.tag.bottom}}});
  }
  return arr;
}

}  // namespace mobench
