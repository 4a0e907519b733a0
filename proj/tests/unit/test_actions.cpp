#include <doctest.h>

#include "mobench/actions.hpp"
#include "mobench/errors.hpp"
#include "support.hpp"

using namespace mobench;
using testsupport::button;
using testsupport::make_tree;

namespace {

ErrorKind parse_error(std::string_view raw) {
  try {
    parse_model_action(raw);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("parsed: " << raw);
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("canonical forms") {
  CHECK(serialize_action(act::Tap{3}) == "tap(element=3)");
  CHECK(serialize_action(act::LongPress{0}) == "long_press(element=0)");
  CHECK(serialize_action(act::Swipe{2, Direction::kLeft, Distance::kShort}) ==
        "swipe(element=2, direction=\"left\", distance=\"short\")");
  CHECK(serialize_action(act::Type{"say \"hi\"\\"}) == "type(text=\"say \\\"hi\\\"\\\\\")");
  CHECK(serialize_action(act::Home{}) == "home()");
  CHECK(serialize_action(act::Back{}) == "back()");
  CHECK(serialize_action(act::Finish{}) == "finish()");
  CHECK(serialize_action(act::Finish{"42"}) == "finish(answer=\"42\")");
}

TEST_CASE("parse tolerates prose and formatting") {
  CHECK(parse_model_action("Thought: open it.\nAction: tap(element=4)") == Action{act::Tap{4}});
  CHECK(parse_model_action("```\nTAP(7)\n```") == Action{act::Tap{7}});
  CHECK(parse_model_action("tap( index = 2 )") == Action{act::Tap{2}});
  CHECK(parse_model_action("swipe(1, up)") == Action{act::Swipe{1, Direction::kUp, Distance::kMedium}});
  CHECK(parse_model_action("swipe(element=1, direction='DOWN', distance=long)") ==
        Action{act::Swipe{1, Direction::kDown, Distance::kLong}});
  CHECK(parse_model_action("type('hello, world')") == Action{act::Type{"hello, world"}});
  CHECK(parse_model_action("type(text=\"a) b\")") == Action{act::Type{"a) b"}});
  CHECK(parse_model_action("finish()") == Action{act::Finish{}});
  CHECK(parse_model_action("finish(answer=\"555-0199\")") == Action{act::Finish{"555-0199"}});
  CHECK(parse_model_action("press home() now") == Action{act::Home{}});
}

TEST_CASE("the first complete call wins") {
  CHECK(parse_model_action("I could tap(2) or back()") == Action{act::Tap{2}});
  // An unterminated call does not block a later complete one.
  CHECK(parse_model_action("type(text=\"oops ... actually back()") == Action{act::Back{}});
  // Names embedded in identifiers are not calls.
  CHECK(parse_model_action("untap(3) then back()") == Action{act::Back{}});
}

TEST_CASE("parse failures") {
  CHECK(parse_error("I am done here.") == ErrorKind::kNoActionFound);
  CHECK(parse_error("click(3)") == ErrorKind::kNoActionFound);
  CHECK(parse_error("tap(element=") == ErrorKind::kNoActionFound);
  CHECK(parse_error("tap()") == ErrorKind::kBadArgument);
  CHECK(parse_error("tap(element=-1)") == ErrorKind::kBadArgument);
  CHECK(parse_error("tap(element=two)") == ErrorKind::kBadArgument);
  CHECK(parse_error("swipe(element=1, direction=\"sideways\")") == ErrorKind::kBadArgument);
  CHECK(parse_error("swipe(element=1, direction=up, distance=far)") == ErrorKind::kBadArgument);
  CHECK(parse_error("swipe(element=1)") == ErrorKind::kBadArgument);
  CHECK(parse_error("type()") == ErrorKind::kBadArgument);
  CHECK(parse_error("type(text=\"bell\a\")") == ErrorKind::kBadArgument);
}

TEST_CASE("unicode and newlines round trip") {
  for (const std::string s : {"caf\xC3\xA9", "\xE4\xBD\xA0\xE5\xA5\xBD", "\xF0\x9F\x98\x80 ok", "line1\nline2", "",
                              "quote \" and \\ slash", "it's"}) {
    Action a = act::Type{s};
    CHECK(parse_model_action(serialize_action(a)) == a);
    Action f = act::Finish{s};
    CHECK(parse_model_action(serialize_action(f)) == f);
  }
}

TEST_CASE("grounding") {
  auto tree = make_tree({button("A", {100, 200, 300, 400}), button("B", {0, 2300, 1080, 2400})});
  auto view = compress(tree);
  ScreenSize screen{1080, 2400};

  CHECK(ground(act::Tap{0}, view, screen) == GroundedAction{grounded::TapAt{200, 300}});
  CHECK(ground(act::LongPress{0}, view, screen) ==
        GroundedAction{grounded::LongPressAt{200, 300, kLongPressDurationMs}});
  CHECK(ground(act::Swipe{0, Direction::kUp, Distance::kMedium}, view, screen) ==
        GroundedAction{grounded::SwipeFromTo{200, 300, 200, 0, kSwipeDurationMs}});
  CHECK(ground(act::Swipe{0, Direction::kRight, Distance::kShort}, view, screen) ==
        GroundedAction{grounded::SwipeFromTo{200, 300, 470, 300, kSwipeDurationMs}});
  CHECK(ground(act::Swipe{1, Direction::kDown, Distance::kLong}, view, screen) ==
        GroundedAction{grounded::SwipeFromTo{540, 2350, 540, 2399, kSwipeDurationMs}});
  CHECK(ground(act::Type{"x"}, view, screen) == GroundedAction{grounded::TypeText{"x"}});
  CHECK(ground(act::Home{}, view, screen) == GroundedAction{grounded::KeyHome{}});
  CHECK(ground(act::Back{}, view, screen) == GroundedAction{grounded::KeyBack{}});
  CHECK(ground(act::Finish{"a"}, view, screen) == GroundedAction{grounded::Done{"a"}});

  try {
    ground(act::Tap{2}, view, screen);
    FAIL("expected IndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIndexOutOfRange);
  }
}

TEST_CASE("describe") {
  CHECK(describe(grounded::TapAt{1, 2}) == "tap_at(1,2)");
  CHECK(describe(grounded::SwipeFromTo{1, 2, 3, 4, 300}) == "swipe(1,2,3,4,300)");
  CHECK(describe(grounded::LongPressAt{5, 6, 800}) == "long_press_at(5,6,800)");
  CHECK(describe(grounded::TypeText{"hi"}) == "type_text(\"hi\")");
  CHECK(describe(grounded::KeyHome{}) == "key_home");
  CHECK(describe(grounded::KeyBack{}) == "key_back");
  CHECK(describe(grounded::Done{}) == "done");
}

TEST_CASE("helpers") {
  CHECK(element_of(act::Swipe{5, Direction::kUp, Distance::kShort}) == 5);
  CHECK_FALSE(element_of(act::Home{}).has_value());
  CHECK(is_finish(act::Finish{}));
  CHECK_FALSE(is_finish(act::Back{}));
}
