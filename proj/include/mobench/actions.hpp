#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "mobench/ui_tree.hpp"

namespace mobench {

enum class Direction { kUp, kDown, kLeft, kRight };
enum class Distance { kShort, kMedium, kLong };

std::string_view direction_name(Direction d);
std::string_view distance_name(Distance d);

namespace act {
struct Tap {
  int element = 0;
  bool operator==(const Tap&) const = default;
};
struct Swipe {
  int element = 0;
  Direction direction = Direction::kUp;
  Distance distance = Distance::kMedium;
  bool operator==(const Swipe&) const = default;
};
struct Type {
  std::string text;
  bool operator==(const Type&) const = default;
};
struct LongPress {
  int element = 0;
  bool operator==(const LongPress&) const = default;
};
struct Home {
  bool operator==(const Home&) const = default;
};
struct Back {
  bool operator==(const Back&) const = default;
};
struct Finish {
  std::optional<std::string> answer;
  bool operator==(const Finish&) const = default;
};
}  // namespace act

// The model-facing action space.
using Action = std::variant<act::Tap, act::Swipe, act::Type, act::LongPress, act::Home, act::Back, act::Finish>;

namespace grounded {
struct TapAt {
  int x = 0, y = 0;
  bool operator==(const TapAt&) const = default;
};
struct SwipeFromTo {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int duration_ms = 0;
  bool operator==(const SwipeFromTo&) const = default;
};
struct TypeText {
  std::string text;
  bool operator==(const TypeText&) const = default;
};
struct LongPressAt {
  int x = 0, y = 0;
  int duration_ms = 0;
  bool operator==(const LongPressAt&) const = default;
};
struct KeyHome {
  bool operator==(const KeyHome&) const = default;
};
struct KeyBack {
  bool operator==(const KeyBack&) const = default;
};
struct Done {
  std::optional<std::string> answer;
  bool operator==(const Done&) const = default;
};
}  // namespace grounded

// The device-facing, coordinate form of an Action.
using GroundedAction = std::variant<grounded::TapAt, grounded::SwipeFromTo, grounded::TypeText,
                                    grounded::LongPressAt, grounded::KeyHome, grounded::KeyBack, grounded::Done>;

inline constexpr int kSwipeDurationMs = 300;
inline constexpr int kLongPressDurationMs = 800;

struct ScreenSize {
  int width = 0;
  int height = 0;
};

// Extracts the first complete call to tap/swipe/type/long_press/home/back/finish
// from a model reply. Throws NoActionFound or BadArgument.
Action parse_model_action(std::string_view raw);

// Canonical single-line call; parse_model_action inverts it.
std::string serialize_action(const Action& action);

GroundedAction ground(const Action& action, const CompressedView& view, ScreenSize screen);

std::string describe(const GroundedAction& g);

bool is_finish(const Action& a);
std::optional<int> element_of(const Action& a);

}  // namespace mobench
