#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobench/ui_tree.hpp"

namespace mobench {

struct ContentPart {
  std::string text;
  // PNG bytes; when set the part is an image and `text` is ignored.
  std::optional<std::vector<std::uint8_t>> png;
};

struct ChatMessage {
  std::string role;
  std::vector<ContentPart> parts;

  static ChatMessage text(std::string role, std::string body) { return {std::move(role), {ContentPart{std::move(body), {}}}}; }
  std::string joined_text() const;
};

// Structured context travelling with a request. HTTP clients ignore it;
// scripted policies (gold-script replay, random baseline) read it.
struct RequestContext {
  std::string task_id;
  std::size_t step_index = 0;
  const CompressedView* view = nullptr;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  RequestContext context;

  int image_count() const;
};

// Raised by clients for failures worth retrying (connection errors, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // One attempt. Throws TransientFailure or Error(kEndpointError).
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

// Forces greedy decoding and retries transient failures with exponential
// backoff. Throws Error(kEndpointError) once retries are exhausted.
std::string llm_call(LlmClient& llm, ChatRequest request, const RetryPolicy& policy = {}, int* retries_used = nullptr);

struct EndpointDescriptor {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
  int timeout_seconds = 120;
};

// Chat-completions style HTTP endpoint.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(EndpointDescriptor endpoint, bool verbose = false);
  std::string complete(const ChatRequest& request) override;

  nlohmann::json request_body(const ChatRequest& request) const;

 private:
  EndpointDescriptor endpoint_;
  bool verbose_;
};

// Replays canned replies in order; the last one repeats once exhausted.
class ScriptedLlmClient : public LlmClient {
 public:
  explicit ScriptedLlmClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::vector<ChatRequest> seen_;
  std::size_t next_ = 0;
};

// Adapts a plain function; handy for tests and custom policies.
class FunctionLlmClient : public LlmClient {
 public:
  explicit FunctionLlmClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override { return fn_(request); }

 private:
  std::function<std::string(const ChatRequest&)> fn_;
};

}  // namespace mobench
