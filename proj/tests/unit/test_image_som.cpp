#include <doctest.h>

#include "mobench/errors.hpp"
#include "mobench/image.hpp"
#include "mobench/som_overlay.hpp"
#include "support.hpp"

using namespace mobench;
using testsupport::button;
using testsupport::make_tree;

TEST_CASE("base64 test vectors") {
  CHECK(base64_encode(std::string_view("")) == "");
  CHECK(base64_encode(std::string_view("f")) == "Zg==");
  CHECK(base64_encode(std::string_view("fo")) == "Zm8=");
  CHECK(base64_encode(std::string_view("foo")) == "Zm9v");
  CHECK(base64_encode(std::string_view("foobar")) == "Zm9vYmFy");
}

TEST_CASE("png round trip preserves pixels") {
  Image img(7, 5, {10, 20, 30, 255});
  img.set(3, 2, {255, 0, 0, 128});
  img.fill_rect({5, 0, 99, 2}, {0, 255, 0, 255});
  auto bytes = encode_png(img);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
  CHECK(decode_png(bytes) == img);
}

TEST_CASE("decode rejects garbage") {
  std::vector<std::uint8_t> junk = {1, 2, 3, 4};
  CHECK_THROWS_AS(decode_png(junk), Error);
}

TEST_CASE("drawing clips to the image") {
  Image img(10, 10);
  img.fill_rect({-5, -5, 3, 3}, {0, 0, 0, 255});
  CHECK(img.at(0, 0) == Rgba{0, 0, 0, 255});
  CHECK(img.at(3, 3) == Rgba{255, 255, 255, 255});
  img.set(50, 50, {1, 1, 1, 255});  // ignored
  img.stroke_rect({2, 2, 8, 8}, 1, {9, 9, 9, 255});
  CHECK(img.at(2, 5) == Rgba{9, 9, 9, 255});
  CHECK(img.at(7, 5) == Rgba{9, 9, 9, 255});
  CHECK(img.at(5, 5) == Rgba{255, 255, 255, 255});
}

TEST_CASE("text metrics") {
  CHECK(text_width("", 2) == 0);
  CHECK(text_width("1", 1) == 5);
  CHECK(text_width("12", 3) == 33);
  CHECK(text_height(4) == 28);
  Image img(40, 20);
  draw_text(img, 1, 1, "1", 2, {0, 0, 0, 255});
  // Top row of '1' is "..#..": only the middle column is inked.
  CHECK(img.at(1 + 4, 1) == Rgba{0, 0, 0, 255});
  CHECK(img.at(1, 1) == Rgba{255, 255, 255, 255});
}

TEST_CASE("SoM marks every element and the legend mirrors the view") {
  auto tree = make_tree({button("A", {100, 200, 400, 300}), button("B", {1060, 2380, 1080, 2400}),
                         button("C", {0, 0, 50, 50})});
  auto view = compress(tree);
  Image shot(1080, 2400, {255, 255, 255, 255});
  Image marked;
  auto som = render_som(shot, view, &marked);

  REQUIRE(som.legend.size() == view.elements.size());
  for (std::size_t i = 0; i < som.legend.size(); ++i) {
    const auto& l = som.legend[i];
    CHECK(l.index == view.elements[i].index);
    CHECK(l.bounds == view.elements[i].bounds);
    CHECK(l.label == view.elements[i].label);
    CHECK(l.tag.left >= 0);
    CHECK(l.tag.top >= 0);
    CHECK(l.tag.right <= 1080);
    CHECK(l.tag.bottom <= 2400);
    CHECK(marked.at(l.bounds.left, (l.bounds.top + l.bounds.bottom) / 2) == som_color(l.index));
  }
  // Tags near the bottom-right corner are pulled back inside the frame.
  CHECK(som.legend[1].tag.right == 1080);
  CHECK(som.legend[1].tag.bottom == 2400);
  CHECK(decode_png(som.png) == marked);

  auto j = legend_to_json(som.legend);
  CHECK(j.size() == 3);
  CHECK(j[0]["index"] == 0);
  CHECK(j[0]["bounds"] == nlohmann::json({100, 200, 400, 300}));
  CHECK(j[2]["label"] == "C");
}

TEST_CASE("SoM styling scales with resolution") {
  auto tree = make_tree({button("A", {100, 200, 400, 300})}, 540, 1200);
  auto view = compress(tree);
  auto som = render_som(Image(540, 1200), view);
  auto big_tree = make_tree({button("A", {100, 200, 400, 300})});
  auto big = render_som(Image(1080, 2400), compress(big_tree));
  CHECK(som.legend[0].tag.width() < big.legend[0].tag.width());
}

TEST_CASE("SoM refuses a screenshot of another size") {
  auto tree = make_tree({button("A", {0, 200, 100, 300})});
  auto view = compress(tree);
  try {
    render_som(Image(720, 1600), view);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
}

TEST_CASE("palette cycles") {
  CHECK(som_color(0) == som_color(kSomPaletteSize));
  CHECK_FALSE(som_color(0) == som_color(1));
}
