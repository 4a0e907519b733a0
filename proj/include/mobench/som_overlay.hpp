#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobench/image.hpp"
#include "mobench/ui_tree.hpp"

namespace mobench {

struct LegendEntry {
  int index = 0;
  Rect bounds;
  std::string label;
  // Where the numbered tag was drawn.
  Rect tag;

  bool operator==(const LegendEntry&) const = default;
};

struct SomImage {
  std::vector<std::uint8_t> png;
  std::vector<LegendEntry> legend;
};

inline constexpr int kSomPaletteSize = 8;
Rgba som_color(int index);

// Marks every element of `view` on a copy of `screenshot`. Raw pixels are
// returned alongside the encoded PNG for callers that keep compositing.
SomImage render_som(const Image& screenshot, const CompressedView& view, Image* marked = nullptr);

// Sidecar record stored next to each SoM image.
nlohmann::json legend_to_json(const std::vector<LegendEntry>& legend);

}  // namespace mobench
