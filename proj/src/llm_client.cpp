#include "mobench/llm_client.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <thread>

#include "mobench/errors.hpp"
#include "mobench/image.hpp"

namespace mobench {

using nlohmann::json;

std::string ChatMessage::joined_text() const {
  std::string out;
  for (const auto& p : parts) {
    if (p.png) continue;
    if (!out.empty()) out += '\n';
    out += p.text;
  }
  return out;
}

int ChatRequest::image_count() const {
  int n = 0;
  for (const auto& m : messages)
    for (const auto& p : m.parts) n += p.png ? 1 : 0;
  return n;
}

std::string llm_call(LlmClient& llm, ChatRequest request, const RetryPolicy& policy, int* retries_used) {
  request.temperature = 0.0;
  auto backoff = policy.initial_backoff;
  std::string last;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string reply = llm.complete(request);
      if (retries_used) *retries_used = attempt;
      return reply;
    } catch (const TransientFailure& e) {
      last = e.what();
      if (attempt >= policy.max_retries) break;
      spdlog::warn("model call failed ({}); retry {} of {}", last, attempt + 1, policy.max_retries);
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorKind::kEndpointError,
              "model endpoint failed after " + std::to_string(policy.max_retries) + " retries: " + last);
}

// ---- HTTP ---------------------------------------------------------------------------

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

Url split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorKind::kConfig, "endpoint url lacks a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  Url u;
  u.origin = url.substr(0, slash);
  u.path = slash == std::string::npos ? "" : url.substr(slash);
  while (!u.path.empty() && u.path.back() == '/') u.path.pop_back();
  return u;
}

std::string reply_text(const json& body) {
  const auto& content = body.at("choices").at(0).at("message").at("content");
  if (content.is_string()) return content.get<std::string>();
  std::string out;
  for (const auto& part : content)
    if (part.value("type", "") == "text") out += part.value("text", "");
  return out;
}

}  // namespace

HttpLlmClient::HttpLlmClient(EndpointDescriptor endpoint, bool verbose)
    : endpoint_(std::move(endpoint)), verbose_(verbose) {
  split_url(endpoint_.base_url);
}

json HttpLlmClient::request_body(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    const bool text_only = std::none_of(m.parts.begin(), m.parts.end(), [](const ContentPart& p) { return p.png.has_value(); });
    if (text_only) {
      messages.push_back({{"role", m.role}, {"content", m.joined_text()}});
      continue;
    }
    json parts = json::array();
    for (const auto& p : m.parts) {
      if (p.png)
        parts.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(*p.png)}}}});
      else
        parts.push_back({{"type", "text"}, {"text", p.text}});
    }
    messages.push_back({{"role", m.role}, {"content", parts}});
  }
  return {{"model", endpoint_.model}, {"temperature", request.temperature}, {"messages", messages}};
}

std::string HttpLlmClient::complete(const ChatRequest& request) {
  const Url url = split_url(endpoint_.base_url);
  httplib::Client cli(url.origin);
  cli.set_connection_timeout(endpoint_.timeout_seconds);
  cli.set_read_timeout(endpoint_.timeout_seconds);
  httplib::Headers headers;
  if (!endpoint_.api_key_env.empty()) {
    const char* key = std::getenv(endpoint_.api_key_env.c_str());
    if (!key || !*key) throw Error(ErrorKind::kEndpointError, "environment variable " + endpoint_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = request_body(request).dump();
  if (verbose_) spdlog::info("request {}: {}", endpoint_.model, body.size() > 4000 ? body.substr(0, 4000) + "..." : body);

  auto res = cli.Post(url.path + "/chat/completions", headers, body, "application/json");
  if (!res) throw TransientFailure("transport error: " + httplib::to_string(res.error()));
  if (verbose_) spdlog::info("response {}: {}", res->status, res->body);
  if (res->status == 429 || res->status >= 500) throw TransientFailure("HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(ErrorKind::kEndpointError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  try {
    return reply_text(json::parse(res->body));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kEndpointError, std::string("unexpected response body: ") + e.what());
  }
}

// ---- scripted ---------------------------------------------------------------------

std::string ScriptedLlmClient::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  seen_.push_back(request);
  if (replies_.empty()) return {};
  const std::size_t i = std::min(next_, replies_.size() - 1);
  ++next_;
  return replies_[i];
}

std::size_t ScriptedLlmClient::calls() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::vector<ChatRequest> ScriptedLlmClient::requests() const {
  std::lock_guard lock(mu_);
  return seen_;
}

}  // namespace mobench
