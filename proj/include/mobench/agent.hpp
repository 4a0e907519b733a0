#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mobench/actions.hpp"
#include "mobench/device.hpp"
#include "mobench/llm_client.hpp"
#include "mobench/som_overlay.hpp"
#include "mobench/task.hpp"
#include "mobench/ui_tree.hpp"

namespace mobench {

enum class Mode { kXml, kSom };
enum class Framework { kDirect, kReact, kSeeAct };
enum class Termination { kFinished, kStepCap, kParseFailure, kDeviceError };

std::string_view mode_name(Mode m);
std::string_view framework_name(Framework f);
std::string_view termination_name(Termination t);
Mode parse_mode(std::string_view s);
Framework parse_framework(std::string_view s);
Termination parse_termination(std::string_view s);

// Template text with {{instruction}}, {{app}}, {{history}}, {{observation}}
// and (SeeAct round 2) {{round1}} slots.
struct PromptTemplates {
  std::string system_xml;
  std::string system_som;
  std::string user_xml;
  std::string user_som;
  std::string react_suffix;
  std::string seeact_round1;
  std::string seeact_round2;

  static PromptTemplates defaults();
  // Missing files keep their default. File names: <field>.txt
  static PromptTemplates load_dir(const std::filesystem::path& dir);
};

std::string fill_template(const std::string& tpl, const std::vector<std::pair<std::string, std::string>>& slots);

struct EpisodeConfig {
  Mode mode = Mode::kXml;
  Framework framework = Framework::kDirect;
  int max_steps = 25;
  EndpointDescriptor model;
  double temperature = 0.0;
  // 0 keeps the whole episode.
  int history_window = 0;
  // Consecutive unusable replies tolerated before giving up.
  int max_strikes = 3;
  RetryPolicy retry;
  PromptTemplates templates = PromptTemplates::defaults();

  void validate() const;
};

struct Step {
  int step_index = 0;
  std::shared_ptr<const Observation> pre_observation;
  CompressedView compressed;  // source points into pre_observation->tree
  std::string model_raw;
  Action action;
  GroundedAction grounded;
  std::shared_ptr<const Observation> post_observation;
  bool changed_screen = false;
  // SoM-mode marked screenshot and legend shown to the model.
  std::optional<SomImage> som;
};

struct Trace {
  std::string task_id;
  std::vector<Step> steps;
  std::optional<std::string> finish_answer;
  Termination termination = Termination::kFinished;
  std::string error;  // device error text when termination = device_error
  int strikes = 0;    // unusable replies seen over the episode
};

struct PromptPayload {
  ChatRequest first;
  // SeeAct only: messages of round two, built by second_round().
  bool two_rounds = false;
  std::string round2_template;

  ChatRequest second_round(const std::string& round1_output) const;
};

std::string serialize_history(const std::vector<Step>& history, int window = 0);

PromptPayload build_prompt(const EpisodeConfig& cfg, const std::string& task_instruction,
                           const std::vector<Step>& history, const CompressedView& current,
                           const std::optional<SomImage>& som, const std::string& app = {});

// Caller resets the device to the task's start app first.
Trace run_episode(const EpisodeConfig& cfg, const TaskSpec& task, Device& device, LlmClient& llm);

// ---- built-in policies ------------------------------------------------------------

// Resolves "@resource_id_leaf", "#\"label\"" selectors (optionally suffixed
// with [n]) to element indices of `view`. Returns nullopt when any selector misses.
std::optional<std::string> resolve_selectors(const std::string& action, const CompressedView& view);

// Replays each task's gold_actions, resolving selectors against the view the
// request carries. Stateless across calls, so safe for concurrent episodes.
class OracleClient : public LlmClient {
 public:
  explicit OracleClient(std::vector<TaskSpec> tasks);
  std::string complete(const ChatRequest& request) override;

 private:
  std::map<std::string, std::vector<std::string>> scripts_;
};

// Uniform choice over the seven action kinds and the visible elements, seeded
// by task id and step so that runs are reproducible.
class RandomClient : public LlmClient {
 public:
  explicit RandomClient(std::uint64_t seed = 0) : seed_(seed) {}
  std::string complete(const ChatRequest& request) override;

 private:
  std::uint64_t seed_;
};

}  // namespace mobench
