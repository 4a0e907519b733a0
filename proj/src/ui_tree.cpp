#include "mobench/ui_tree.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <functional>
#include <memory>
#include <regex>
#include <sstream>

#include "mobench/errors.hpp"

namespace mobench {

std::size_t RawUiTree::node_count() const {
  std::size_t n = 0;
  for_each([&](const UiNode&, int) { ++n; });
  return n;
}

const UiNode* RawUiTree::find(int node_id) const {
  const UiNode* hit = nullptr;
  for_each([&](const UiNode& n, int) {
    if (n.node_id == node_id) hit = &n;
  });
  return hit;
}

std::string_view element_kind_name(ElementKind kind) {
  switch (kind) {
    case ElementKind::kClickable: return "clickable";
    case ElementKind::kFocusable: return "focusable";
    case ElementKind::kScrollable: return "scrollable";
    case ElementKind::kEditable: return "editable";
  }
  return "clickable";
}

bool is_editable_class(std::string_view class_name) {
  return class_name.find("EditText") != std::string_view::npos;
}

std::string_view leaf_segment(std::string_view s, char sep) {
  auto pos = s.rfind(sep);
  return pos == std::string_view::npos ? s : s.substr(pos + 1);
}

// ---- parsing ----------------------------------------------------------------

namespace {

struct ParseState {
  int screen_width = 0;
  int screen_height = 0;
  std::vector<UiNode> top_level;
  std::vector<UiNode> stack;
  int next_id = 0;
  int depth = 0;
  std::string error;
  ErrorKind error_kind = ErrorKind::kMalformedXml;
  XML_Parser parser = nullptr;
};

bool parse_bool(const char* v) { return std::string_view(v) == "true"; }

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// "[l,t][r,b]"
bool parse_bounds(std::string_view s, Rect& r) {
  static const std::regex re(R"(^\[(-?\d+),(-?\d+)\]\[(-?\d+),(-?\d+)\]$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(s.begin(), s.end(), m, re)) return false;
  auto get = [&](int i, int& out) {
    return parse_int(std::string_view(&*m[i].first, static_cast<std::size_t>(m[i].length())), out);
  };
  return get(1, r.left) && get(2, r.top) && get(3, r.right) && get(4, r.bottom);
}

void clamp_bounds(Rect& r, int w, int h) {
  r.left = std::clamp(r.left, 0, w);
  r.right = std::clamp(r.right, 0, w);
  r.top = std::clamp(r.top, 0, h);
  r.bottom = std::clamp(r.bottom, 0, h);
  r.right = std::max(r.right, r.left);
  r.bottom = std::max(r.bottom, r.top);
}

void fail(ParseState& st, ErrorKind kind, std::string msg) {
  if (st.error.empty()) {
    st.error = std::move(msg);
    st.error_kind = kind;
  }
  XML_StopParser(st.parser, XML_FALSE);
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto& st = *static_cast<ParseState*>(user);
  std::string_view tag(name);
  ++st.depth;
  if (tag == "hierarchy") {
    if (st.depth != 1) fail(st, ErrorKind::kMalformedXml, "nested hierarchy element");
    return;
  }
  if (tag != "node") return;

  UiNode n;
  n.node_id = st.next_id++;
  bool has_bounds = false;
  bool has_visible = false;
  for (int i = 0; attrs[i]; i += 2) {
    std::string_view key(attrs[i]);
    const char* val = attrs[i + 1];
    if (key == "class") n.class_name = val;
    else if (key == "resource-id") n.resource_id = val;
    else if (key == "text") n.text = val;
    else if (key == "content-desc") n.content_desc = val;
    else if (key == "package") n.package = val;
    else if (key == "clickable") n.clickable = parse_bool(val);
    else if (key == "long-clickable") n.long_clickable = parse_bool(val);
    else if (key == "focusable") n.focusable = parse_bool(val);
    else if (key == "focused") n.focused = parse_bool(val);
    else if (key == "scrollable") n.scrollable = parse_bool(val);
    else if (key == "checkable") n.checkable = parse_bool(val);
    else if (key == "checked") n.checked = parse_bool(val);
    else if (key == "enabled") n.enabled = parse_bool(val);
    else if (key == "visible-to-user") {
      n.visible = parse_bool(val);
      has_visible = true;
    } else if (key == "bounds") {
      if (!parse_bounds(val, n.bounds)) {
        fail(st, ErrorKind::kMalformedXml, "bad bounds attribute '" + std::string(val) + "'");
        return;
      }
      has_bounds = true;
    }
  }
  // Older dumps omit visible-to-user entirely; treat such nodes as visible.
  if (!has_visible) n.visible = true;
  if (!has_bounds) {
    fail(st, ErrorKind::kMissingBounds, "node " + std::to_string(n.node_id) + " has no bounds");
    return;
  }
  clamp_bounds(n.bounds, st.screen_width, st.screen_height);
  st.stack.push_back(std::move(n));
}

void XMLCALL on_end(void* user, const XML_Char* name) {
  auto& st = *static_cast<ParseState*>(user);
  --st.depth;
  if (std::string_view(name) != "node" || st.stack.empty()) return;
  UiNode done = std::move(st.stack.back());
  st.stack.pop_back();
  if (st.stack.empty()) st.top_level.push_back(std::move(done));
  else st.stack.back().children.push_back(std::move(done));
}

}  // namespace

RawUiTree parse_hierarchy_xml(std::string_view xml_text, int screen_width, int screen_height) {
  ParseState st;
  st.screen_width = screen_width;
  st.screen_height = screen_height;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  st.parser = parser.get();
  XML_SetUserData(st.parser, &st);
  XML_SetElementHandler(st.parser, on_start, on_end);
  auto status = XML_Parse(st.parser, xml_text.data(), static_cast<int>(xml_text.size()), XML_TRUE);
  if (!st.error.empty()) throw Error(st.error_kind, st.error);
  if (status != XML_STATUS_OK) {
    std::ostringstream msg;
    msg << XML_ErrorString(XML_GetErrorCode(st.parser)) << " at line "
        << XML_GetCurrentLineNumber(st.parser);
    throw Error(ErrorKind::kMalformedXml, msg.str());
  }

  RawUiTree tree;
  tree.screen_width = screen_width;
  tree.screen_height = screen_height;
  if (st.top_level.size() == 1) {
    tree.root = std::move(st.top_level.front());
  } else {
    // Multi-window or empty dumps get a synthetic full-screen root; ids shift by one.
    tree.root.class_name = "hierarchy";
    tree.root.bounds = Rect{0, 0, screen_width, screen_height};
    tree.root.node_id = 0;
    tree.root.children = std::move(st.top_level);
    std::function<void(UiNode&)> bump = [&](UiNode& n) {
      ++n.node_id;
      for (auto& c : n.children) bump(c);
    };
    for (auto& c : tree.root.children) bump(c);
  }
  return tree;
}

namespace {

void escape_attr(std::ostream& os, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '&': os << "&amp;"; break;
      case '<': os << "&lt;"; break;
      case '>': os << "&gt;"; break;
      case '"': os << "&quot;"; break;
      case '\n': os << "&#10;"; break;
      case '\r': os << "&#13;"; break;
      case '\t': os << "&#9;"; break;
      default: os << c;
    }
  }
}

void write_node(std::ostream& os, const UiNode& n, int index) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "<node index=\"" << index << "\" text=\"";
  escape_attr(os, n.text);
  os << "\" resource-id=\"";
  escape_attr(os, n.resource_id);
  os << "\" class=\"";
  escape_attr(os, n.class_name);
  os << "\" package=\"";
  escape_attr(os, n.package);
  os << "\" content-desc=\"";
  escape_attr(os, n.content_desc);
  os << "\" checkable=\"" << b(n.checkable) << "\" checked=\"" << b(n.checked) << "\" clickable=\""
     << b(n.clickable) << "\" enabled=\"" << b(n.enabled) << "\" focusable=\"" << b(n.focusable)
     << "\" focused=\"" << b(n.focused) << "\" scrollable=\"" << b(n.scrollable)
     << "\" long-clickable=\"" << b(n.long_clickable) << "\" visible-to-user=\"" << b(n.visible)
     << "\" bounds=\"[" << n.bounds.left << ',' << n.bounds.top << "][" << n.bounds.right << ','
     << n.bounds.bottom << "]\"";
  if (n.children.empty()) {
    os << "/>";
    return;
  }
  os << '>';
  for (std::size_t i = 0; i < n.children.size(); ++i) write_node(os, n.children[i], static_cast<int>(i));
  os << "</node>";
}

}  // namespace

std::string write_hierarchy_xml(const RawUiTree& tree) {
  std::ostringstream os;
  os << "<?xml version='1.0' encoding='UTF-8' standalone='yes' ?><hierarchy rotation=\"0\">";
  write_node(os, tree.root, 0);
  os << "</hierarchy>";
  return os.str();
}

// ---- compression ------------------------------------------------------------

namespace {

bool is_interactive(const UiNode& n) {
  return n.clickable || n.long_clickable || n.focusable || n.scrollable || is_editable_class(n.class_name);
}

bool is_live(const UiNode& n) { return n.visible && !n.bounds.empty(); }

ElementKind kind_of(const UiNode& n) {
  if (is_editable_class(n.class_name)) return ElementKind::kEditable;
  if (n.clickable || n.long_clickable) return ElementKind::kClickable;
  if (n.scrollable) return ElementKind::kScrollable;
  return ElementKind::kFocusable;
}

std::string one_line(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  return out;
}

// Truncates to kMaxLabelChars code points.
std::string truncate_label(const std::string& s) {
  std::size_t cps = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (cps == kMaxLabelChars) return s.substr(0, i) + "...";
      ++cps;
    }
  }
  return s;
}

const std::string* own_text(const UiNode& n) {
  if (!n.text.empty()) return &n.text;
  if (!n.content_desc.empty()) return &n.content_desc;
  return nullptr;
}

// First text carried by a live, non-interactive descendant, without crossing
// into nested interactive nodes.
const std::string* descendant_text(const UiNode& n) {
  for (const auto& c : n.children) {
    if (is_interactive(c)) continue;
    if (is_live(c)) {
      if (const auto* t = own_text(c)) return t;
    }
    if (const auto* t = descendant_text(c)) return t;
  }
  return nullptr;
}

std::string label_of(const UiNode& n) {
  if (const auto* t = own_text(n)) return one_line(*t);
  if (const auto* t = descendant_text(n)) return one_line(*t);
  if (!n.resource_id.empty()) return std::string(leaf_segment(n.resource_id, '/'));
  return std::string(leaf_segment(n.class_name, '.'));
}

struct Line {
  std::optional<int> index;
  std::string body;  // everything after "index. "
  std::string label;
  Rect bounds;
};

std::string center_suffix(const Rect& r) {
  return " @(" + std::to_string(r.center_x()) + "," + std::to_string(r.center_y()) + ")";
}

void collect(const UiNode& n, const std::string* enclosing_label, std::vector<ElementRef>& elements,
             std::vector<Line>& lines) {
  const std::string* label_for_children = enclosing_label;
  std::string label;
  if (is_live(n) && is_interactive(n)) {
    ElementRef e;
    e.index = static_cast<int>(elements.size());
    e.source_node_id = n.node_id;
    e.bounds = n.bounds;
    e.label = label_of(n);
    e.kind = kind_of(n);
    if (n.checkable) e.checked = n.checked;
    e.focused = n.focused && e.kind == ElementKind::kEditable;
    std::string body = truncate_label(e.label) + " (" + std::string(element_kind_name(e.kind)) + ")" +
                       center_suffix(e.bounds);
    if (e.checked) body += *e.checked ? " [checked]" : " [unchecked]";
    if (e.focused) body += " [focused]";
    lines.push_back(Line{e.index, std::move(body), e.label, e.bounds});
    label = e.label;
    elements.push_back(std::move(e));
    label_for_children = &label;
  } else if (is_live(n)) {
    if (const auto* t = own_text(n)) {
      std::string text = one_line(*t);
      if (!enclosing_label || *enclosing_label != text) {
        lines.push_back(Line{std::nullopt, "- " + truncate_label(text) + center_suffix(n.bounds), text, n.bounds});
      }
    }
  }
  for (const auto& c : n.children) collect(c, label_for_children, elements, lines);
}

std::vector<Line> build_lines(const RawUiTree& tree, std::vector<ElementRef>& elements) {
  std::vector<Line> lines;
  collect(tree.root, nullptr, elements, lines);
  return lines;
}

bool is_volatile(const Line& l, int screen_height) {
  static const std::regex clock(R"(^\s*\d{1,2}:\d{2}(:\d{2})?\s*$)");
  static const std::regex battery(R"(^\s*\d{1,3}\s?%\s*$)");
  const int band = screen_height * 5 / 100;
  if (l.bounds.bottom <= band) return true;
  return std::regex_match(l.label, clock) || std::regex_match(l.label, battery);
}

}  // namespace

CompressedView compress(const RawUiTree& tree) {
  CompressedView view;
  view.source = &tree;
  auto lines = build_lines(tree, view.elements);
  std::string out;
  for (const auto& l : lines) {
    if (l.index) out += std::to_string(*l.index) + ". ";
    out += l.body;
    out += '\n';
  }
  view.text_rendering = std::move(out);
  return view;
}

std::vector<std::string> stable_rendering(const RawUiTree& tree) {
  std::vector<ElementRef> elements;
  std::vector<std::string> out;
  for (auto& l : build_lines(tree, elements)) {
    if (!is_volatile(l, tree.screen_height)) out.push_back(std::move(l.body));
  }
  return out;
}

bool screen_changed(const RawUiTree& before, const RawUiTree& after) {
  return stable_rendering(before) != stable_rendering(after);
}

// ---- predicates -------------------------------------------------------------

bool StringTest::matches(std::string_view s) const {
  switch (op) {
    case StringOp::kEquals: return s == value;
    case StringOp::kContains: return s.find(value) != std::string_view::npos;
    case StringOp::kEndsWith: return s.size() >= value.size() && s.substr(s.size() - value.size()) == value;
    case StringOp::kRegex: {
      std::regex re(value);
      return std::regex_search(s.begin(), s.end(), re);
    }
  }
  return false;
}

namespace {
bool all_match(const std::vector<StringTest>& tests, std::string_view s) {
  return std::all_of(tests.begin(), tests.end(), [&](const StringTest& t) { return t.matches(s); });
}
}  // namespace

bool NodePredicate::matches(const UiNode& n) const {
  if (!all_match(text, n.text) || !all_match(content_desc, n.content_desc) ||
      !all_match(resource_id, n.resource_id) || !all_match(class_name, n.class_name))
    return false;
  if (checked && n.checked != *checked) return false;
  if (enabled && n.enabled != *enabled) return false;
  if (focused && n.focused != *focused) return false;
  return true;
}

std::vector<const UiNode*> match_predicate(const RawUiTree& tree, const NodePredicate& pred) {
  std::vector<const UiNode*> out;
  tree.for_each([&](const UiNode& n, int) {
    if (pred.matches(n)) out.push_back(&n);
  });
  return out;
}

}  // namespace mobench
