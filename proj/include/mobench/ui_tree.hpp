#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobench {

struct Rect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  int width() const { return right - left; }
  int height() const { return bottom - top; }
  bool empty() const { return width() <= 0 || height() <= 0; }
  int center_x() const { return (left + right) / 2; }
  int center_y() const { return (top + bottom) / 2; }
  bool contains(int x, int y) const { return x >= left && x <= right && y >= top && y <= bottom; }
  bool contains(const Rect& o) const {
    return o.left >= left && o.right <= right && o.top >= top && o.bottom <= bottom;
  }

  bool operator==(const Rect&) const = default;
};

struct UiNode {
  int node_id = 0;
  std::string class_name;
  std::string resource_id;
  std::string text;
  std::string content_desc;
  std::string package;
  Rect bounds;
  bool clickable = false;
  bool long_clickable = false;
  bool focusable = false;
  bool focused = false;
  bool scrollable = false;
  bool checkable = false;
  bool checked = false;
  bool enabled = false;
  bool visible = true;
  std::vector<UiNode> children;

  bool operator==(const UiNode&) const = default;
};

struct RawUiTree {
  UiNode root;
  int screen_width = 0;
  int screen_height = 0;
  std::int64_t capture_timestamp = 0;

  // Pre-order walk; visit(node, depth).
  template <typename Fn>
  void for_each(Fn&& visit) const {
    walk(root, 0, visit);
  }
  std::size_t node_count() const;
  const UiNode* find(int node_id) const;

 private:
  template <typename Fn>
  static void walk(const UiNode& n, int depth, Fn& visit) {
    visit(n, depth);
    for (const auto& c : n.children) walk(c, depth + 1, visit);
  }
};

enum class ElementKind { kClickable, kFocusable, kScrollable, kEditable };

std::string_view element_kind_name(ElementKind kind);

struct ElementRef {
  int index = 0;
  int source_node_id = 0;
  Rect bounds;
  std::string label;
  ElementKind kind = ElementKind::kClickable;
  // Set for checkable sources so that toggles are visible in the rendering.
  std::optional<bool> checked;
  bool focused = false;

  bool operator==(const ElementRef&) const = default;
};

struct CompressedView {
  std::vector<ElementRef> elements;
  std::string text_rendering;
  const RawUiTree* source = nullptr;
};

// Longest label kept verbatim in the text rendering.
inline constexpr std::size_t kMaxLabelChars = 60;

// Parses `uiautomator dump` output. Bounds are clamped to the screen.
RawUiTree parse_hierarchy_xml(std::string_view xml_text, int screen_width, int screen_height);

// Inverse of parse_hierarchy_xml for trees whose bounds are already on-screen.
std::string write_hierarchy_xml(const RawUiTree& tree);

CompressedView compress(const RawUiTree& tree);

// Rendering with the volatile lines (clock, battery, status bar band) removed
// and element indices dropped; the basis for change detection.
std::vector<std::string> stable_rendering(const RawUiTree& tree);

bool screen_changed(const RawUiTree& before, const RawUiTree& after);

bool is_editable_class(std::string_view class_name);
std::string_view leaf_segment(std::string_view s, char sep);

// ---- predicates -------------------------------------------------------------

enum class StringOp { kEquals, kContains, kRegex, kEndsWith };

struct StringTest {
  StringOp op = StringOp::kEquals;
  std::string value;

  bool matches(std::string_view s) const;
};

// Conjunction of attribute tests over a single node.
struct NodePredicate {
  std::vector<StringTest> text;
  std::vector<StringTest> content_desc;
  std::vector<StringTest> resource_id;
  std::vector<StringTest> class_name;
  std::optional<bool> checked;
  std::optional<bool> enabled;
  std::optional<bool> focused;
  // Number of matching nodes required for the predicate to hold on a tree.
  int min_count = 1;

  bool matches(const UiNode& node) const;
};

std::vector<const UiNode*> match_predicate(const RawUiTree& tree, const NodePredicate& pred);

}  // namespace mobench
