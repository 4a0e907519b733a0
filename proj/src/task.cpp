#include "mobench/task.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

#include "mobench/actions.hpp"
#include "mobench/errors.hpp"

namespace mobench {

using nlohmann::json;

std::string_view task_kind_name(TaskKind k) { return k == TaskKind::kOperation ? "operation" : "query"; }

// ---- predicates ----------------------------------------------------------------------

namespace {

const std::vector<std::pair<const char*, StringOp>> kOps = {
    {"equals", StringOp::kEquals},
    {"contains", StringOp::kContains},
    {"regex", StringOp::kRegex},
    {"ends_with", StringOp::kEndsWith},
};

const char* op_name(StringOp op) {
  for (const auto& [name, o] : kOps)
    if (o == op) return name;
  return "equals";
}

StringTest test_from_json(const json& j) {
  if (j.is_string()) return {StringOp::kEquals, j.get<std::string>()};
  if (!j.is_object() || j.size() != 1) throw Error(ErrorKind::kConfig, "string test must be a string or a one-key object");
  for (const auto& [name, op] : kOps)
    if (j.contains(name)) return {op, j.at(name).get<std::string>()};
  throw Error(ErrorKind::kConfig, "unknown string test '" + j.begin().key() + "'");
}

std::vector<StringTest> tests_from_json(const json& j) {
  std::vector<StringTest> out;
  if (j.is_array())
    for (const auto& t : j) out.push_back(test_from_json(t));
  else
    out.push_back(test_from_json(j));
  return out;
}

json tests_to_json(const std::vector<StringTest>& tests) {
  json arr = json::array();
  for (const auto& t : tests) arr.push_back({{op_name(t.op), t.value}});
  return arr.size() == 1 ? arr[0] : arr;
}

const std::set<std::string> kPredicateKeys = {"text",    "content_desc", "resource_id", "class_name",
                                              "checked", "enabled",      "focused",     "min_count"};
const std::set<std::string> kProbeKeys = {"path", "equals", "contains", "has_item", "negate"};
const std::set<std::string> kSubGoalKeys = {"name", "predicate", "state_probe", "ordered_after"};
const std::set<std::string> kTaskKeys = {"task_id",     "app",          "instruction", "kind",
                                         "sub_goals",   "gold_answer",  "human_steps", "env_fixture",
                                         "gold_actions", "description"};

}  // namespace

NodePredicate predicate_from_json(const json& j) {
  NodePredicate p;
  if (auto it = j.find("text"); it != j.end()) p.text = tests_from_json(*it);
  if (auto it = j.find("content_desc"); it != j.end()) p.content_desc = tests_from_json(*it);
  if (auto it = j.find("resource_id"); it != j.end()) p.resource_id = tests_from_json(*it);
  if (auto it = j.find("class_name"); it != j.end()) p.class_name = tests_from_json(*it);
  if (auto it = j.find("checked"); it != j.end()) p.checked = it->get<bool>();
  if (auto it = j.find("enabled"); it != j.end()) p.enabled = it->get<bool>();
  if (auto it = j.find("focused"); it != j.end()) p.focused = it->get<bool>();
  p.min_count = j.value("min_count", 1);
  return p;
}

json predicate_to_json(const NodePredicate& p) {
  json j = json::object();
  if (!p.text.empty()) j["text"] = tests_to_json(p.text);
  if (!p.content_desc.empty()) j["content_desc"] = tests_to_json(p.content_desc);
  if (!p.resource_id.empty()) j["resource_id"] = tests_to_json(p.resource_id);
  if (!p.class_name.empty()) j["class_name"] = tests_to_json(p.class_name);
  if (p.checked) j["checked"] = *p.checked;
  if (p.enabled) j["enabled"] = *p.enabled;
  if (p.focused) j["focused"] = *p.focused;
  if (p.min_count != 1) j["min_count"] = p.min_count;
  return j;
}

bool StateProbe::holds(const json& state) const {
  bool ok = false;
  const json::json_pointer ptr(path);
  if (state.contains(ptr)) {
    const json& v = state.at(ptr);
    if (equals) {
      ok = v == *equals;
    } else if (contains) {
      ok = v.is_string() && v.get_ref<const std::string&>().find(*contains) != std::string::npos;
    } else if (has_item) {
      if (v.is_array())
        for (const auto& item : v) {
          bool all = item.is_object();
          for (auto f = has_item->begin(); all && f != has_item->end(); ++f)
            all = item.contains(f.key()) && item.at(f.key()) == f.value();
          if (all) {
            ok = true;
            break;
          }
        }
    } else {
      ok = true;  // existence
    }
  }
  return negate ? !ok : ok;
}

// ---- tasks ---------------------------------------------------------------------------

TaskSpec TaskSpec::from_json(const json& j) {
  TaskSpec t;
  t.task_id = j.at("task_id").get<std::string>();
  t.app = j.at("app").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "operation") t.kind = TaskKind::kOperation;
  else if (kind == "query") t.kind = TaskKind::kQuery;
  else throw Error(ErrorKind::kConfig, "task " + t.task_id + ": unknown kind '" + kind + "'");
  for (const auto& g : j.value("sub_goals", json::array())) {
    SubGoalSpec s;
    s.name = g.at("name").get<std::string>();
    if (auto p = g.find("predicate"); p != g.end()) s.predicate = predicate_from_json(*p);
    if (auto p = g.find("state_probe"); p != g.end()) {
      StateProbe probe;
      probe.path = p->at("path").get<std::string>();
      if (p->contains("equals")) probe.equals = p->at("equals");
      if (p->contains("contains")) probe.contains = p->at("contains").get<std::string>();
      if (p->contains("has_item")) probe.has_item = p->at("has_item");
      probe.negate = p->value("negate", false);
      s.state_probe = std::move(probe);
    }
    if (auto p = g.find("ordered_after"); p != g.end() && !p->is_null()) s.ordered_after = p->get<std::string>();
    t.sub_goals.push_back(std::move(s));
  }
  if (auto a = j.find("gold_answer"); a != j.end() && !a->is_null()) t.gold_answer = a->get<std::string>();
  t.human_steps = j.value("human_steps", 1);
  t.env_fixture = j.value("env_fixture", "default");
  t.gold_actions = j.value("gold_actions", std::vector<std::string>{});
  return t;
}

json TaskSpec::to_json() const {
  json goals = json::array();
  for (const auto& s : sub_goals) {
    json g = {{"name", s.name}};
    if (s.predicate) g["predicate"] = predicate_to_json(*s.predicate);
    if (s.state_probe) {
      json p = {{"path", s.state_probe->path}};
      if (s.state_probe->equals) p["equals"] = *s.state_probe->equals;
      if (s.state_probe->contains) p["contains"] = *s.state_probe->contains;
      if (s.state_probe->has_item) p["has_item"] = *s.state_probe->has_item;
      if (s.state_probe->negate) p["negate"] = true;
      g["state_probe"] = p;
    }
    if (s.ordered_after) g["ordered_after"] = *s.ordered_after;
    goals.push_back(g);
  }
  json j = {{"task_id", task_id},         {"app", app},           {"instruction", instruction},
            {"kind", task_kind_name(kind)}, {"sub_goals", goals}, {"human_steps", human_steps},
            {"env_fixture", env_fixture}};
  if (gold_answer) j["gold_answer"] = *gold_answer;
  if (!gold_actions.empty()) j["gold_actions"] = gold_actions;
  return j;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TaskSpec load_task(const std::filesystem::path& file) {
  const std::string text = read_file(file);
  auto diags = validate_task_json(file.string(), text);
  if (!diags.empty()) throw Error(ErrorKind::kConfig, format_diagnostic(diags.front()));
  return TaskSpec::from_json(json::parse(text));
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<TaskSpec> out;
  for (const auto& f : files) out.push_back(load_task(f));
  return out;
}

// ---- validation ----------------------------------------------------------------------

std::string format_diagnostic(const Diagnostic& d) {
  std::string s = d.file;
  if (d.line > 0) s += ":" + std::to_string(d.line);
  return s + ": " + d.message;
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// First line holding `"needle"`; falls back to the bare needle, then 0.
int line_of(const std::string& text, const std::string& needle, std::size_t from = 0) {
  auto pos = text.find("\"" + needle + "\"", from);
  if (pos == std::string::npos) pos = text.find(needle, from);
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

void check_string_tests(const json& v, const std::string& key, const std::function<void(const std::string&)>& report) {
  const json items = v.is_array() ? v : json::array({v});
  if (items.empty()) report(key + ": empty test list");
  for (const auto& t : items) {
    if (t.is_string()) continue;
    if (!t.is_object() || t.size() != 1) {
      report(key + ": a string test is a string or a one-key object");
      continue;
    }
    const std::string op = t.begin().key();
    bool known = false;
    for (const auto& [name, o] : kOps) known |= op == name;
    if (!known) {
      report(key + ": unknown test '" + op + "'");
      continue;
    }
    if (!t.begin()->is_string()) {
      report(key + "." + op + ": value must be a string");
      continue;
    }
    if (op == "regex") {
      try {
        std::regex re(t.begin()->get<std::string>());
      } catch (const std::regex_error&) {
        report(key + ": invalid regex '" + t.begin()->get<std::string>() + "'");
      }
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_task_json(const std::string& file, const std::string& text) {
  std::vector<Diagnostic> out;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    out.push_back({file, line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), std::string("JSON syntax: ") + e.what()});
    return out;
  }
  auto add = [&](int line, std::string msg) { out.push_back({file, line, std::move(msg)}); };
  if (!j.is_object()) {
    add(1, "task document must be an object");
    return out;
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kTaskKeys.count(it.key())) add(line_of(text, it.key()), "unknown field '" + it.key() + "'");

  auto need_string = [&](const char* key) {
    if (!j.contains(key)) add(1, std::string("missing field '") + key + "'");
    else if (!j[key].is_string() || j[key].get_ref<const std::string&>().empty())
      add(line_of(text, key), std::string("'") + key + "' must be a nonempty string");
  };
  need_string("task_id");
  need_string("app");
  need_string("instruction");

  std::string kind;
  if (!j.contains("kind")) add(1, "missing field 'kind'");
  else if (!j["kind"].is_string() || (j["kind"] != "operation" && j["kind"] != "query"))
    add(line_of(text, "kind"), "'kind' must be \"operation\" or \"query\"");
  else kind = j["kind"].get<std::string>();

  if (j.contains("human_steps") && (!j["human_steps"].is_number_integer() || j["human_steps"].get<int>() < 1))
    add(line_of(text, "human_steps"), "'human_steps' must be an integer >= 1");
  if (!j.contains("human_steps")) add(1, "missing field 'human_steps'");
  if (j.contains("env_fixture") && !j["env_fixture"].is_string())
    add(line_of(text, "env_fixture"), "'env_fixture' must be a string");

  const json goals = j.value("sub_goals", json::array());
  if (!goals.is_array()) add(line_of(text, "sub_goals"), "'sub_goals' must be a list");
  if (kind == "operation" && goals.is_array() && goals.empty())
    add(j.contains("sub_goals") ? line_of(text, "sub_goals") : 1, "operation task has no sub_goals");
  if (kind == "query" && (!j.contains("gold_answer") || !j["gold_answer"].is_string()))
    add(j.contains("gold_answer") ? line_of(text, "gold_answer") : 1, "query task needs a string 'gold_answer'");

  std::set<std::string> earlier;
  if (goals.is_array()) {
    std::size_t cursor = text.find("\"sub_goals\"");
    if (cursor == std::string::npos) cursor = 0;
    for (const auto& g : goals) {
      const std::string name = g.is_object() ? g.value("name", "") : "";
      int line = line_of(text, "sub_goals");
      if (!name.empty()) {
        // Locate the "name": "<name>" pair itself; the bare name may also occur in ordered_after.
        const std::regex key("\"name\"\\s*:\\s*\"" + std::regex_replace(name, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)") + "\"");
        std::smatch m;
        if (std::regex_search(text.cbegin() + static_cast<std::ptrdiff_t>(cursor), text.cend(), m, key)) {
          const auto pos = cursor + static_cast<std::size_t>(m.position(0));
          line = line_of_offset(text, pos);
          cursor = pos + 1;
        }
      }
      auto rep = [&](const std::string& msg) { add(line, "sub-goal '" + name + "': " + msg); };
      if (!g.is_object()) {
        add(line, "sub-goal must be an object");
        continue;
      }
      for (auto it = g.begin(); it != g.end(); ++it)
        if (!kSubGoalKeys.count(it.key())) rep("unknown field '" + it.key() + "'");
      if (name.empty()) rep("missing 'name'");
      else if (earlier.count(name)) rep("duplicate name");
      const bool has_pred = g.contains("predicate"), has_probe = g.contains("state_probe");
      if (has_pred == has_probe) rep("needs exactly one of 'predicate' or 'state_probe'");
      if (has_pred) {
        const auto& p = g["predicate"];
        if (!p.is_object() || p.empty()) {
          rep("predicate must be a nonempty object");
        } else {
          for (auto it = p.begin(); it != p.end(); ++it) {
            if (!kPredicateKeys.count(it.key())) rep("unknown predicate field '" + it.key() + "'");
            else if (it.key() == "checked" || it.key() == "enabled" || it.key() == "focused") {
              if (!it->is_boolean()) rep(it.key() + " must be a boolean");
            } else if (it.key() == "min_count") {
              if (!it->is_number_integer() || it->get<int>() < 1) rep("min_count must be an integer >= 1");
            } else {
              check_string_tests(*it, it.key(), rep);
            }
          }
        }
      }
      if (has_probe) {
        const auto& p = g["state_probe"];
        if (!p.is_object()) {
          rep("state_probe must be an object");
        } else {
          for (auto it = p.begin(); it != p.end(); ++it)
            if (!kProbeKeys.count(it.key())) rep("unknown state_probe field '" + it.key() + "'");
          if (!p.contains("path") || !p["path"].is_string() || p["path"].get<std::string>().rfind('/', 0) != 0)
            rep("state_probe.path must be a JSON pointer starting with '/'");
          const int ops = int(p.contains("equals")) + int(p.contains("contains")) + int(p.contains("has_item"));
          if (ops > 1) rep("state_probe takes at most one of equals/contains/has_item");
          if (p.contains("contains") && !p["contains"].is_string()) rep("state_probe.contains must be a string");
          if (p.contains("has_item") && !p["has_item"].is_object()) rep("state_probe.has_item must be an object");
        }
      }
      if (g.contains("ordered_after") && !g["ordered_after"].is_null()) {
        if (!g["ordered_after"].is_string()) rep("ordered_after must be a string");
        else if (!earlier.count(g["ordered_after"].get<std::string>()))
          rep("ordered_after references unknown or later sub-goal '" + g["ordered_after"].get<std::string>() + "'");
      }
      if (!name.empty()) earlier.insert(name);
    }
  }

  if (j.contains("gold_actions")) {
    const auto& acts = j["gold_actions"];
    if (!acts.is_array()) {
      add(line_of(text, "gold_actions"), "'gold_actions' must be a list of strings");
    } else {
      static const std::regex selector(R"(([(=,]\s*)(@[A-Za-z0-9_.:/-]+|#"[^"]*")(\[\d+\])?)");
      for (const auto& a : acts) {
        if (!a.is_string()) {
          add(line_of(text, "gold_actions"), "gold action must be a string");
          continue;
        }
        const std::string s = a.get<std::string>();
        try {
          parse_model_action(std::regex_replace(s, selector, "$010"));
        } catch (const Error& e) {
          add(line_of(text, s), "gold action '" + s + "' does not parse: " + e.what());
        }
      }
      if (j.contains("human_steps") && j["human_steps"].is_number_integer() &&
          j["human_steps"].get<int>() != static_cast<int>(acts.size()))
        add(line_of(text, "human_steps"), "human_steps differs from the gold script length " + std::to_string(acts.size()));
    }
  }
  return out;
}

}  // namespace mobench
