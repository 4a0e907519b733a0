#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "mobench/ui_tree.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(MOBENCH_SOURCE_DIR); }
inline fs::path suite_dir() { return source_dir() / "data" / "sim_suite"; }
inline fs::path fixtures() { return source_dir() / "tests" / "fixtures"; }

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("mobench-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline mobench::UiNode node(std::string cls, mobench::Rect bounds) {
  mobench::UiNode n;
  n.class_name = std::move(cls);
  n.bounds = bounds;
  n.enabled = true;
  return n;
}

inline mobench::UiNode button(std::string text, mobench::Rect bounds) {
  auto n = node("android.widget.Button", bounds);
  n.text = std::move(text);
  n.clickable = true;
  return n;
}

// Assigns pre-order node ids and wraps `children` under a full-screen root.
inline mobench::RawUiTree make_tree(std::vector<mobench::UiNode> children, int w = 1080, int h = 2400) {
  mobench::RawUiTree t;
  t.screen_width = w;
  t.screen_height = h;
  t.root = node("android.widget.FrameLayout", {0, 0, w, h});
  t.root.children = std::move(children);
  int next = 0;
  std::function<void(mobench::UiNode&)> number = [&](mobench::UiNode& n) {
    n.node_id = next++;
    for (auto& c : n.children) number(c);
  };
  number(t.root);
  return t;
}

}  // namespace testsupport
