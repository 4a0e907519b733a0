#include "mobench/agent.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "mobench/errors.hpp"

namespace mobench {

// ---- enums ---------------------------------------------------------------------------

std::string_view mode_name(Mode m) { return m == Mode::kXml ? "xml" : "som"; }

std::string_view framework_name(Framework f) {
  switch (f) {
    case Framework::kDirect: return "direct";
    case Framework::kReact: return "react";
    case Framework::kSeeAct: return "seeact";
  }
  return "direct";
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::kFinished: return "finished";
    case Termination::kStepCap: return "step_cap";
    case Termination::kParseFailure: return "parse_failure";
    case Termination::kDeviceError: return "device_error";
  }
  return "finished";
}

Mode parse_mode(std::string_view s) {
  if (s == "xml") return Mode::kXml;
  if (s == "som") return Mode::kSom;
  throw Error(ErrorKind::kConfig, "unknown mode '" + std::string(s) + "'");
}

Framework parse_framework(std::string_view s) {
  if (s == "direct") return Framework::kDirect;
  if (s == "react") return Framework::kReact;
  if (s == "seeact") return Framework::kSeeAct;
  throw Error(ErrorKind::kConfig, "unknown framework '" + std::string(s) + "'");
}

Termination parse_termination(std::string_view s) {
  for (auto t : {Termination::kFinished, Termination::kStepCap, Termination::kParseFailure, Termination::kDeviceError})
    if (termination_name(t) == s) return t;
  throw Error(ErrorKind::kConfig, "unknown termination '" + std::string(s) + "'");
}

void EpisodeConfig::validate() const {
  if (max_steps < 1) throw Error(ErrorKind::kConfig, "max_steps must be >= 1");
  if (history_window < 0) throw Error(ErrorKind::kConfig, "history_window must be >= 0");
  if (max_strikes < 1) throw Error(ErrorKind::kConfig, "max_strikes must be >= 1");
}

// ---- templates -------------------------------------------------------------------------

namespace {

constexpr const char* kActionSpace = R"(Available actions (call exactly one per reply):
- tap(element=N): tap element N
- long_press(element=N): press and hold element N
- swipe(element=N, direction="up|down|left|right", distance="short|medium|long"): swipe starting at element N
- type(text="..."): enter text into the focused input field
- back(): press the Back key
- home(): press the Home key
- finish(answer="..."): stop; give the answer when the task asks a question, otherwise call finish())";

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.system_xml = std::string(
                     "You operate an Android phone to complete a task for the user. Each turn you receive a list "
                     "of the interactive elements on the current screen, one per line, as\n"
                     "\"index. label (kind) @(x,y)\". Lines starting with \"-\" are plain text on the screen.\n\n") +
                 kActionSpace + "\n\nReply with a single function call in the format above.";
  t.system_som = std::string(
                     "You operate an Android phone to complete a task for the user. Each turn you receive a "
                     "screenshot in which every interactive element is outlined and tagged with a number. Refer "
                     "to elements by that number.\n\n") +
                 kActionSpace + "\n\nReply with a single function call in the format above.";
  t.user_xml =
      "Task: {{instruction}}\n\nPrevious actions:\n{{history}}\n\nCurrent screen ({{app}}):\n{{observation}}";
  t.user_som =
      "Task: {{instruction}}\n\nPrevious actions:\n{{history}}\n\nThe current screenshot ({{app}}) is attached.";
  t.react_suffix =
      "Think step by step before acting. First write \"Thought:\" followed by your reasoning about the screen and "
      "the remaining work, then write \"Action:\" followed by exactly one function call.";
  t.seeact_round1 =
      "Do not call a function yet. Describe in detail the single next action you want to take: which element, "
      "what operation, and why it moves the task forward.";
  t.seeact_round2 =
      "Your description of the next action was:\n{{round1}}\n\nNow output that action as exactly one function "
      "call from the action list, with no other text.";
  return t;
}

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
  PromptTemplates t = defaults();
  const std::pair<const char*, std::string*> fields[] = {
      {"system_xml", &t.system_xml},       {"system_som", &t.system_som},       {"user_xml", &t.user_xml},
      {"user_som", &t.user_som},           {"react_suffix", &t.react_suffix},   {"seeact_round1", &t.seeact_round1},
      {"seeact_round2", &t.seeact_round2},
  };
  for (const auto& [name, dst] : fields) {
    std::ifstream in(dir / (std::string(name) + ".txt"), std::ios::binary);
    if (!in) continue;
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    while (!s.empty() && s.back() == '\n') s.pop_back();
    *dst = std::move(s);
  }
  return t;
}

std::string fill_template(const std::string& tpl, const std::vector<std::pair<std::string, std::string>>& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    auto open = tpl.find("{{", i);
    if (open == std::string::npos) break;
    auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(tpl, i, open - i);
    const std::string key = tpl.substr(open + 2, close - open - 2);
    bool found = false;
    for (const auto& [k, v] : slots)
      if (k == key) {
        out += v;
        found = true;
        break;
      }
    if (!found) out.append(tpl, open, close + 2 - open);
    i = close + 2;
  }
  out.append(tpl, i, std::string::npos);
  return out;
}

// ---- prompts ----------------------------------------------------------------------------

std::string serialize_history(const std::vector<Step>& history, int window) {
  if (history.empty()) return "(none)";
  std::size_t from = 0;
  if (window > 0 && history.size() > static_cast<std::size_t>(window)) from = history.size() - static_cast<std::size_t>(window);
  std::string out;
  for (std::size_t i = from; i < history.size(); ++i) {
    const auto& s = history[i];
    if (!out.empty()) out += '\n';
    out += "Step " + std::to_string(s.step_index) + ": " + serialize_action(s.action) +
           " (screen changed: " + (s.changed_screen ? "yes" : "no") + ")";
  }
  return out;
}

PromptPayload build_prompt(const EpisodeConfig& cfg, const std::string& task_instruction,
                           const std::vector<Step>& history, const CompressedView& current,
                           const std::optional<SomImage>& som, const std::string& app) {
  if (cfg.mode == Mode::kSom && !som) throw Error(ErrorKind::kPrecondition, "som mode needs a rendered SoM image");
  const auto& t = cfg.templates;
  const std::vector<std::pair<std::string, std::string>> slots = {
      {"instruction", task_instruction},
      {"app", app.empty() ? std::string("app") : app},
      {"history", serialize_history(history, cfg.history_window)},
      {"observation", current.text_rendering.empty() ? std::string("(no interactive elements)") : current.text_rendering},
  };

  PromptPayload p;
  p.first.temperature = cfg.temperature;
  p.first.context.step_index = history.size();
  p.first.context.view = &current;
  p.first.messages.push_back(ChatMessage::text("system", cfg.mode == Mode::kXml ? t.system_xml : t.system_som));

  ChatMessage user;
  user.role = "user";
  std::string body = fill_template(cfg.mode == Mode::kXml ? t.user_xml : t.user_som, slots);
  if (cfg.framework == Framework::kReact) body += "\n\n" + fill_template(t.react_suffix, slots);
  if (cfg.framework == Framework::kSeeAct) body += "\n\n" + fill_template(t.seeact_round1, slots);
  user.parts.push_back(ContentPart{std::move(body), {}});
  if (cfg.mode == Mode::kSom) user.parts.push_back(ContentPart{{}, som->png});
  p.first.messages.push_back(std::move(user));

  if (cfg.framework == Framework::kSeeAct) {
    p.two_rounds = true;
    p.round2_template = fill_template(t.seeact_round2, slots);
  }
  return p;
}

ChatRequest PromptPayload::second_round(const std::string& round1_output) const {
  ChatRequest r = first;
  r.messages.push_back(ChatMessage::text("assistant", round1_output));
  r.messages.push_back(ChatMessage::text("user", fill_template(round2_template, {{"round1", round1_output}})));
  return r;
}

// ---- episode ----------------------------------------------------------------------------

namespace {

bool is_usable_reply_error(ErrorKind k) {
  return k == ErrorKind::kNoActionFound || k == ErrorKind::kBadArgument || k == ErrorKind::kIndexOutOfRange;
}

}  // namespace

Trace run_episode(const EpisodeConfig& cfg, const TaskSpec& task, Device& device, LlmClient& llm) {
  cfg.validate();
  Trace trace;
  trace.task_id = task.task_id;
  const bool som_mode = cfg.mode == Mode::kSom;

  std::shared_ptr<Observation> current;
  try {
    current = std::make_shared<Observation>(device.observe(som_mode));
  } catch (const Error& e) {
    trace.termination = Termination::kDeviceError;
    trace.error = e.what();
    return trace;
  }

  int strikes = 0;
  while (true) {
    if (static_cast<int>(trace.steps.size()) >= cfg.max_steps) {
      trace.termination = Termination::kStepCap;
      break;
    }
    CompressedView view = compress(current->tree);
    std::optional<SomImage> som;
    if (som_mode) {
      if (!current->screenshot) throw Error(ErrorKind::kPrecondition, "device returned no screenshot in som mode");
      som = render_som(*current->screenshot, view);
    }
    PromptPayload payload = build_prompt(cfg, task.instruction, trace.steps, view, som, current->foreground_app);
    payload.first.context.task_id = task.task_id;

    std::string raw = llm_call(llm, payload.first, cfg.retry);
    std::string to_parse = raw;
    if (payload.two_rounds) {
      std::string round2 = llm_call(llm, payload.second_round(raw), cfg.retry);
      raw += "\n\n" + round2;
      to_parse = std::move(round2);
    }

    Action action;
    GroundedAction grounded;
    try {
      action = parse_model_action(to_parse);
      grounded = ground(action, view, device.screen());
    } catch (const Error& e) {
      if (!is_usable_reply_error(e.kind())) throw;
      ++trace.strikes;
      spdlog::debug("{}: unusable reply ({}), strike {}", task.task_id, e.what(), strikes + 1);
      if (++strikes >= cfg.max_strikes) {
        trace.termination = Termination::kParseFailure;
        break;
      }
      continue;
    }
    strikes = 0;

    Step step;
    step.step_index = static_cast<int>(trace.steps.size());
    step.model_raw = std::move(raw);
    step.action = action;
    step.grounded = grounded;
    step.som = std::move(som);
    if (current->screenshot) current->screenshot.reset();  // the marked PNG is kept instead
    step.pre_observation = current;

    if (is_finish(action)) {
      step.post_observation = current;
      step.changed_screen = false;
      step.compressed = std::move(view);
      trace.finish_answer = std::get<act::Finish>(action).answer;
      trace.steps.push_back(std::move(step));
      trace.termination = Termination::kFinished;
      break;
    }

    try {
      try {
        device.perform(grounded);
      } catch (const Error& e) {
        // Typing with nothing focused is an ineffective step, not a broken device.
        if (e.kind() != ErrorKind::kNoFocusedField) throw;
      }
      current = std::make_shared<Observation>(device.observe(som_mode));
    } catch (const Error& e) {
      trace.termination = Termination::kDeviceError;
      trace.error = e.what();
      break;
    }
    step.post_observation = current;
    step.changed_screen = screen_changed(step.pre_observation->tree, current->tree);
    step.compressed = std::move(view);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

// ---- selectors and built-in policies -------------------------------------------------------

std::optional<std::string> resolve_selectors(const std::string& action, const CompressedView& view) {
  static const std::regex selector(R"(([(=,]\s*)(@[A-Za-z0-9_.:/-]+|#"[^"]*")(?:\[(\d+)\])?)");
  std::string out;
  auto begin = std::sregex_iterator(action.begin(), action.end(), selector);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const std::string sel = m[2].str();
    const int nth = m[3].matched ? std::stoi(m[3].str()) : 0;
    int seen = 0;
    std::optional<int> index;
    for (const auto& e : view.elements) {
      bool hit = false;
      if (sel[0] == '@') {
        const UiNode* n = view.source ? view.source->find(e.source_node_id) : nullptr;
        hit = n && leaf_segment(n->resource_id, '/') == sel.substr(1);
      } else {
        hit = e.label == sel.substr(2, sel.size() - 3);
      }
      if (hit && seen++ == nth) {
        index = e.index;
        break;
      }
    }
    if (!index) return std::nullopt;
    out.append(action, last, static_cast<std::size_t>(m.position(0)) - last);
    out += m[1].str() + std::to_string(*index);
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  out.append(action, last, std::string::npos);
  return out;
}

OracleClient::OracleClient(std::vector<TaskSpec> tasks) {
  for (auto& t : tasks) scripts_[t.task_id] = std::move(t.gold_actions);
}

std::string OracleClient::complete(const ChatRequest& request) {
  auto it = scripts_.find(request.context.task_id);
  if (it == scripts_.end()) return "finish()";
  const auto& script = it->second;
  const std::size_t k = request.context.step_index;
  if (k >= script.size()) return "finish()";
  if (!request.context.view) return script[k];
  auto resolved = resolve_selectors(script[k], *request.context.view);
  if (!resolved) return "oracle: no element matches the selector in " + script[k];
  return *resolved;
}

namespace {

std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) h = (h ^ c) * 16777619u;
  return h;
}

}  // namespace

std::string RandomClient::complete(const ChatRequest& request) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    fnv1a(request.context.task_id),
                    static_cast<std::uint32_t>(request.context.step_index)};
  std::mt19937 rng(seq);
  const int n = request.context.view ? static_cast<int>(request.context.view->elements.size()) : 0;
  auto pick = [&](int bound) { return std::uniform_int_distribution<int>(0, bound - 1)(rng); };
  static const char* kWords[] = {"hello", "test", "42", "note", "abc"};
  static const char* kDirs[] = {"up", "down", "left", "right"};
  static const char* kDists[] = {"short", "medium", "long"};
  while (true) {
    switch (pick(7)) {
      case 0:
        if (n) return "tap(element=" + std::to_string(pick(n)) + ")";
        break;
      case 1:
        if (n)
          return "swipe(element=" + std::to_string(pick(n)) + ", direction=\"" + kDirs[pick(4)] + "\", distance=\"" +
                 kDists[pick(3)] + "\")";
        break;
      case 2: return std::string("type(text=\"") + kWords[pick(5)] + "\")";
      case 3:
        if (n) return "long_press(element=" + std::to_string(pick(n)) + ")";
        break;
      case 4: return "home()";
      case 5: return "back()";
      default: return "finish()";
    }
  }
}

}  // namespace mobench
