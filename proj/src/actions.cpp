#include "mobench/actions.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <vector>

#include "mobench/errors.hpp"

namespace mobench {

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
  }
  return "up";
}

std::string_view distance_name(Distance d) {
  switch (d) {
    case Distance::kShort: return "short";
    case Distance::kMedium: return "medium";
    case Distance::kLong: return "long";
  }
  return "medium";
}

bool is_finish(const Action& a) { return std::holds_alternative<act::Finish>(a); }

std::optional<int> element_of(const Action& a) {
  if (auto* t = std::get_if<act::Tap>(&a)) return t->element;
  if (auto* s = std::get_if<act::Swipe>(&a)) return s->element;
  if (auto* l = std::get_if<act::LongPress>(&a)) return l->element;
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 7> kNames = {"tap", "swipe", "type", "long_press", "home", "back", "finish"};

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct Arg {
  std::string name;  // lowercased; empty when positional
  std::string value;
  bool quoted = false;
};

struct Call {
  std::string name;
  std::vector<Arg> args;
};

class Cursor {
 public:
  explicit Cursor(std::string_view s, std::size_t pos) : s_(s), pos_(pos) {}

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  std::string ident() {
    std::size_t start = pos_;
    while (!eof() && is_ident_char(peek())) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  // Quoted string with backslash escapes; false when unterminated.
  bool quoted(std::string& out) {
    char q = peek();
    ++pos_;
    while (!eof()) {
      char c = peek();
      ++pos_;
      if (c == q) return true;
      if (c == '\\' && !eof()) {
        char e = peek();
        ++pos_;
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: out += e;
        }
        continue;
      }
      out += c;
    }
    return false;
  }

  std::string bare() {
    std::size_t start = pos_;
    while (!eof() && peek() != ',' && peek() != ')') ++pos_;
    auto v = s_.substr(start, pos_ - start);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return std::string(v);
  }

 private:
  std::string_view s_;
  std::size_t pos_;
};

// Parses "(args...)" starting at the opening paren. Empty optional when the
// argument list is not syntactically complete.
std::optional<std::vector<Arg>> parse_args(std::string_view s, std::size_t open) {
  Cursor c(s, open + 1);
  std::vector<Arg> args;
  c.skip_ws();
  if (!c.eof() && c.peek() == ')') return args;
  while (true) {
    c.skip_ws();
    if (c.eof()) return std::nullopt;
    Arg a;
    // name=value?
    if (is_ident_char(c.peek()) && !std::isdigit(static_cast<unsigned char>(c.peek()))) {
      Cursor probe = c;
      std::string id = probe.ident();
      probe.skip_ws();
      if (!probe.eof() && (probe.peek() == '=' || probe.peek() == ':')) {
        probe.advance();
        probe.skip_ws();
        a.name = lower(id);
        c = probe;
      }
    }
    if (c.eof()) return std::nullopt;
    if (c.peek() == '"' || c.peek() == '\'') {
      a.quoted = true;
      if (!c.quoted(a.value)) return std::nullopt;
    } else {
      a.value = c.bare();
    }
    args.push_back(std::move(a));
    c.skip_ws();
    if (c.eof()) return std::nullopt;
    if (c.peek() == ')') return args;
    if (c.peek() != ',') return std::nullopt;
    c.advance();
  }
}

std::optional<Call> find_first_call(std::string_view raw) {
  const std::string low = lower(raw);
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!is_ident_char(low[i]) || (i > 0 && is_ident_char(low[i - 1]))) continue;
    std::size_t j = i;
    while (j < low.size() && is_ident_char(low[j])) ++j;
    std::string_view id(low.data() + i, j - i);
    if (std::find(kNames.begin(), kNames.end(), id) == kNames.end()) {
      i = j - 1;
      continue;
    }
    std::size_t k = j;
    while (k < low.size() && std::isspace(static_cast<unsigned char>(low[k]))) ++k;
    if (k >= low.size() || low[k] != '(') {
      i = j - 1;
      continue;
    }
    if (auto args = parse_args(raw, k)) return Call{std::string(id), std::move(*args)};
    i = j - 1;
  }
  return std::nullopt;
}

const Arg* find_arg(const std::vector<Arg>& args, std::initializer_list<std::string_view> names,
                    std::size_t position) {
  for (const auto& a : args)
    for (auto n : names)
      if (a.name == n) return &a;
  std::size_t seen = 0;
  for (const auto& a : args) {
    if (!a.name.empty()) continue;
    if (seen++ == position) return &a;
  }
  return nullptr;
}

int element_arg(const Call& call) {
  const Arg* a = find_arg(call.args, {"element", "index", "idx", "id"}, 0);
  if (!a) throw Error(ErrorKind::kBadArgument, call.name + ": missing element");
  std::string_view v = a->value;
  int out = -1;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || out < 0)
    throw Error(ErrorKind::kBadArgument, call.name + ": element '" + a->value + "' is not a non-negative integer");
  return out;
}

Direction direction_arg(const Call& call) {
  const Arg* a = find_arg(call.args, {"direction", "dir"}, 1);
  if (!a) throw Error(ErrorKind::kBadArgument, "swipe: missing direction");
  auto v = lower(a->value);
  for (auto d : {Direction::kUp, Direction::kDown, Direction::kLeft, Direction::kRight})
    if (v == direction_name(d)) return d;
  throw Error(ErrorKind::kBadArgument, "swipe: unknown direction '" + a->value + "'");
}

Distance distance_arg(const Call& call) {
  const Arg* a = find_arg(call.args, {"distance", "dist"}, 2);
  if (!a) return Distance::kMedium;
  auto v = lower(a->value);
  for (auto d : {Distance::kShort, Distance::kMedium, Distance::kLong})
    if (v == distance_name(d)) return d;
  throw Error(ErrorKind::kBadArgument, "swipe: unknown distance '" + a->value + "'");
}

bool has_bad_control(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return (u < 0x20 && c != '\n') || u == 0x7F;
  });
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

Action parse_model_action(std::string_view raw) {
  auto call = find_first_call(raw);
  if (!call) throw Error(ErrorKind::kNoActionFound, "no function call in reply");
  const auto& name = call->name;
  if (name == "tap") return act::Tap{element_arg(*call)};
  if (name == "long_press") return act::LongPress{element_arg(*call)};
  if (name == "swipe") return act::Swipe{element_arg(*call), direction_arg(*call), distance_arg(*call)};
  if (name == "home") return act::Home{};
  if (name == "back") return act::Back{};
  if (name == "type") {
    const Arg* a = find_arg(call->args, {"text", "input", "content"}, 0);
    if (!a) throw Error(ErrorKind::kBadArgument, "type: missing text");
    if (has_bad_control(a->value)) throw Error(ErrorKind::kBadArgument, "type: control characters in text");
    return act::Type{a->value};
  }
  const Arg* a = find_arg(call->args, {"answer", "message", "text"}, 0);
  if (!a) return act::Finish{};
  return act::Finish{a->value};
}

std::string serialize_action(const Action& action) {
  struct Visitor {
    std::string operator()(const act::Tap& a) const { return "tap(element=" + std::to_string(a.element) + ")"; }
    std::string operator()(const act::Swipe& a) const {
      return "swipe(element=" + std::to_string(a.element) + ", direction=\"" + std::string(direction_name(a.direction)) +
             "\", distance=\"" + std::string(distance_name(a.distance)) + "\")";
    }
    std::string operator()(const act::Type& a) const { return "type(text=" + quote(a.text) + ")"; }
    std::string operator()(const act::LongPress& a) const {
      return "long_press(element=" + std::to_string(a.element) + ")";
    }
    std::string operator()(const act::Home&) const { return "home()"; }
    std::string operator()(const act::Back&) const { return "back()"; }
    std::string operator()(const act::Finish& a) const {
      return a.answer ? "finish(answer=" + quote(*a.answer) + ")" : "finish()";
    }
  };
  return std::visit(Visitor{}, action);
}

GroundedAction ground(const Action& action, const CompressedView& view, ScreenSize screen) {
  auto element = [&](int idx) -> const ElementRef& {
    if (idx < 0 || static_cast<std::size_t>(idx) >= view.elements.size())
      throw Error(ErrorKind::kIndexOutOfRange,
                  "element " + std::to_string(idx) + " of " + std::to_string(view.elements.size()));
    return view.elements[static_cast<std::size_t>(idx)];
  };
  auto cx = [&](int x) { return std::clamp(x, 0, std::max(0, screen.width - 1)); };
  auto cy = [&](int y) { return std::clamp(y, 0, std::max(0, screen.height - 1)); };

  if (auto* t = std::get_if<act::Tap>(&action)) {
    const auto& e = element(t->element);
    return grounded::TapAt{cx(e.bounds.center_x()), cy(e.bounds.center_y())};
  }
  if (auto* l = std::get_if<act::LongPress>(&action)) {
    const auto& e = element(l->element);
    return grounded::LongPressAt{cx(e.bounds.center_x()), cy(e.bounds.center_y()), kLongPressDurationMs};
  }
  if (auto* s = std::get_if<act::Swipe>(&action)) {
    const auto& e = element(s->element);
    const int x = cx(e.bounds.center_x());
    const int y = cy(e.bounds.center_y());
    int pct = s->distance == Distance::kShort ? 25 : s->distance == Distance::kMedium ? 50 : 75;
    int dx = 0, dy = 0;
    switch (s->direction) {
      case Direction::kUp: dy = -screen.height * pct / 100; break;
      case Direction::kDown: dy = screen.height * pct / 100; break;
      case Direction::kLeft: dx = -screen.width * pct / 100; break;
      case Direction::kRight: dx = screen.width * pct / 100; break;
    }
    return grounded::SwipeFromTo{x, y, cx(x + dx), cy(y + dy), kSwipeDurationMs};
  }
  if (auto* t = std::get_if<act::Type>(&action)) return grounded::TypeText{t->text};
  if (std::holds_alternative<act::Home>(action)) return grounded::KeyHome{};
  if (std::holds_alternative<act::Back>(action)) return grounded::KeyBack{};
  return grounded::Done{std::get<act::Finish>(action).answer};
}

std::string describe(const GroundedAction& g) {
  struct Visitor {
    std::string operator()(const grounded::TapAt& a) const {
      return "tap_at(" + std::to_string(a.x) + "," + std::to_string(a.y) + ")";
    }
    std::string operator()(const grounded::SwipeFromTo& a) const {
      return "swipe(" + std::to_string(a.x1) + "," + std::to_string(a.y1) + "," + std::to_string(a.x2) + "," +
             std::to_string(a.y2) + "," + std::to_string(a.duration_ms) + ")";
    }
    std::string operator()(const grounded::TypeText& a) const { return "type_text(" + quote(a.text) + ")"; }
    std::string operator()(const grounded::LongPressAt& a) const {
      return "long_press_at(" + std::to_string(a.x) + "," + std::to_string(a.y) + "," +
             std::to_string(a.duration_ms) + ")";
    }
    std::string operator()(const grounded::KeyHome&) const { return "key_home"; }
    std::string operator()(const grounded::KeyBack&) const { return "key_back"; }
    std::string operator()(const grounded::Done& a) const { return a.answer ? "done(" + quote(*a.answer) + ")" : "done"; }
  };
  return std::visit(Visitor{}, g);
}

}  // namespace mobench
