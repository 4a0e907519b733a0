#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "mobench/errors.hpp"
#include "mobench/image.hpp"
#include "mobench/llm_client.hpp"

using namespace mobench;
using nlohmann::json;

namespace {

// Minimal chat-completions endpoint on a loopback port.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  EndpointDescriptor descriptor(std::string key_env = {}) const {
    return {"http://127.0.0.1:" + std::to_string(port_) + "/v1/", "test-model", std::move(key_env), 5};
  }

  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void reply_json(httplib::Response& res, const std::string& text) {
  json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
  res.set_content(body.dump(), "application/json");
}

ChatRequest simple_request() {
  ChatRequest r;
  r.messages.push_back(ChatMessage::text("system", "be brief"));
  r.messages.push_back(ChatMessage::text("user", "hi"));
  r.temperature = 0.7;
  return r;
}

RetryPolicy fast_retry(int n = 3) { return {n, std::chrono::milliseconds(1)}; }

}  // namespace

TEST_CASE("request body shape") {
  HttpLlmClient client({"http://localhost:1/v1", "m", "", 5});
  ChatRequest r = simple_request();
  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G'};
  r.messages.push_back(ChatMessage{"user", {ContentPart{"look", {}}, ContentPart{"", png}}});
  auto body = client.request_body(r);
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0] == json({{"role", "system"}, {"content", "be brief"}}));
  CHECK(body["messages"][2]["content"][0] == json({{"type", "text"}, {"text", "look"}}));
  CHECK(body["messages"][2]["content"][1]["image_url"]["url"] ==
        "data:image/png;base64," + base64_encode(std::span<const std::uint8_t>(png)));
  CHECK(r.image_count() == 1);
}

TEST_CASE("a successful call forces greedy decoding") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { reply_json(res, "tap(element=1)"); });
  HttpLlmClient client(ep.descriptor());
  CHECK(llm_call(client, simple_request(), fast_retry()) == "tap(element=1)");
  auto sent = json::parse(ep.last_body);
  CHECK(sent["temperature"] == 0.0);
  CHECK(sent["messages"].size() == 2);
  CHECK(ep.last_auth.empty());
}

TEST_CASE("api key comes from the named environment variable") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { reply_json(res, "ok"); });
  ::unsetenv("MOBENCH_TEST_KEY");
  HttpLlmClient client(ep.descriptor("MOBENCH_TEST_KEY"));
  try {
    client.complete(simple_request());
    FAIL("expected EndpointError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEndpointError);
  }
  CHECK(ep.hits == 0);
  ::setenv("MOBENCH_TEST_KEY", "sk-test", 1);
  CHECK(client.complete(simple_request()) == "ok");
  CHECK(ep.last_auth == "Bearer sk-test");
  ::unsetenv("MOBENCH_TEST_KEY");
}

TEST_CASE("429 and 5xx are retried") {
  std::atomic<int> n{0};
  FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
    int k = n++;
    if (k == 0) res.status = 429;
    else if (k == 1) res.status = 503;
    else reply_json(res, "back()");
  });
  HttpLlmClient client(ep.descriptor());
  int retries = -1;
  CHECK(llm_call(client, simple_request(), fast_retry(), &retries) == "back()");
  CHECK(retries == 2);
  CHECK(ep.hits == 3);
}

TEST_CASE("exhausted retries raise EndpointError") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  HttpLlmClient client(ep.descriptor());
  try {
    llm_call(client, simple_request(), fast_retry(2));
    FAIL("expected EndpointError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEndpointError);
  }
  CHECK(ep.hits == 3);
}

TEST_CASE("client errors are not retried") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  HttpLlmClient client(ep.descriptor());
  CHECK_THROWS_AS(llm_call(client, simple_request(), fast_retry()), Error);
  CHECK(ep.hits == 1);
}

TEST_CASE("content arrays are flattened") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
    json body = {{"choices",
                  {{{"message",
                     {{"content", {{{"type", "text"}, {"text", "home"}}, {{"type", "text"}, {"text", "()"}}}}}}}}}};
    res.set_content(body.dump(), "application/json");
  });
  HttpLlmClient client(ep.descriptor());
  CHECK(client.complete(simple_request()) == "home()");
}

TEST_CASE("malformed bodies are endpoint errors") {
  FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
  HttpLlmClient client(ep.descriptor());
  CHECK_THROWS_AS(client.complete(simple_request()), Error);
}

TEST_CASE("unreachable endpoint is transient") {
  HttpLlmClient client({"http://127.0.0.1:1/v1", "m", "", 1});
  CHECK_THROWS_AS(client.complete(simple_request()), TransientFailure);
}

TEST_CASE("bad base url") { CHECK_THROWS_AS(HttpLlmClient({"localhost/v1", "m", "", 1}), Error); }

TEST_CASE("scripted client repeats the last reply") {
  ScriptedLlmClient s({"a", "b"});
  ChatRequest r;
  CHECK(s.complete(r) == "a");
  CHECK(s.complete(r) == "b");
  CHECK(s.complete(r) == "b");
  CHECK(s.calls() == 3);
}

TEST_CASE("joined text skips images") {
  ChatMessage m{"user", {ContentPart{"a", {}}, ContentPart{"", std::vector<std::uint8_t>{1}}, ContentPart{"b", {}}}};
  CHECK(m.joined_text() == "a\nb");
}
