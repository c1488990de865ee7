#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/util.hpp"

using namespace rulecheck;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rulecheck-gw-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

PromptCatalog source_catalog() {
  return PromptCatalog(std::filesystem::path(RULECHECK_SOURCE_DIR) / "prompts");
}

PromptCatalog tiny_catalog(const std::filesystem::path& dir) {
  write_file(dir / "greet.txt", "Hello {{name}}, welcome to {{place}}. Again: {{name}}.");
  return PromptCatalog(dir);
}

}  // namespace

TEST_CASE("render substitutes every occurrence and rejects bad bindings") {
  const auto dir = temp_dir("render");
  PromptCatalog catalog = tiny_catalog(dir);

  const auto request = catalog.render("greet", {{"name", "Ada"}, {"place", "here"}});
  CHECK(request.rendered == "Hello Ada, welcome to here. Again: Ada.");
  CHECK(request.rendered.find("{{") == std::string::npos);

  CHECK_THROWS_AS(static_cast<void>(catalog.render("greet", {{"name", "Ada"}})), GatewayError);
  CHECK_THROWS_AS(static_cast<void>(catalog.render("greet", {{"name", "Ada"},
                                                             {"place", "x"},
                                                             {"bogus", "y"}})),
                  GatewayError);
  CHECK_THROWS_AS(static_cast<void>(catalog.render("no-such-template", {})), GatewayError);
}

TEST_CASE("binding values are emitted verbatim, never re-scanned") {
  const auto dir = temp_dir("render-verbatim");
  PromptCatalog catalog = tiny_catalog(dir);
  const auto request = catalog.render("greet", {{"name", "{{place}}"}, {"place", "there"}});
  CHECK(request.rendered == "Hello {{place}}, welcome to there. Again: {{place}}.");
}

TEST_CASE("catalog carries the framework and completion prompts") {
  PromptCatalog catalog = source_catalog();
  CHECK(catalog.text("codegen-framework-cfamily").find(
            "You are a Revit secondary development engineer") != std::string::npos);
  CHECK(catalog.text("codegen-framework-cfamily").find("Please first generate the code framework") !=
        std::string::npos);
  CHECK(catalog.text("codegen-completion-cfamily").find(
            "implement the unimplemented functions in the code framework") != std::string::npos);

  const auto request = catalog.render(
      "codegen-framework-cfamily",
      {{"entity_list", "[\"detector\"]"}, {"event_list", "[]"}, {"rule_content", "rule text"},
       {"dependencies", ""}, {"rule_index", "6.2.2"}, {"example", ""}});
  CHECK(request.rendered.find("[\"detector\"]") != std::string::npos);
  CHECK(request.rendered.find("'''rule text'''") != std::string::npos);

  CHECK_THROWS_AS(static_cast<void>(catalog.render(
                      "codegen-framework-cfamily",
                      {{"entity_list", "[]"}, {"event_list", "[]"}, {"dependencies", ""},
                       {"rule_index", "6.2.2"}, {"example", ""}})),
                  GatewayError);
}

TEST_CASE("fingerprints are stable and sensitive to every request part") {
  PromptRequest a;
  a.template_id = "greet";
  a.rendered = "Hello";
  a.params = {0.0, 4096};
  PromptRequest b = a;
  CHECK(fingerprint(a) == fingerprint(b));

  b.rendered = "Hello!";
  CHECK(fingerprint(a) != fingerprint(b));
  b = a;
  b.template_id = "other";
  CHECK(fingerprint(a) != fingerprint(b));
  b = a;
  b.params.temperature = 0.5;
  CHECK(fingerprint(a) != fingerprint(b));
  b = a;
  b.params.max_tokens = 100;
  CHECK(fingerprint(a) != fingerprint(b));

  // pinned value: fingerprinting must stay stable across platforms and runs
  CHECK(fingerprint(a) == sha256_hex("rulecheck-prompt-v1\ngreet\n0.000000\n4096\nHello"));
}

TEST_CASE("replay store round-trips records and misses loudly") {
  const auto dir = temp_dir("store");
  ReplayStore store(dir, true);
  ReplayRecord record;
  record.fingerprint = "abc123";
  record.template_id = "greet";
  record.rendered_sha = sha256_hex("Hello");
  record.response_text = "Hi there";
  record.recorded_at = "1970-01-01T00:00:00Z";
  store.put(record);

  ReplayStore reloaded(dir);
  REQUIRE(reloaded.size() == 1);
  const auto found = reloaded.get("abc123");
  REQUIRE(found.has_value());
  CHECK(found->response_text == "Hi there");
  CHECK(!reloaded.get("missing").has_value());
}

TEST_CASE("replay provider returns stored completions and errors on misses") {
  const auto dir = temp_dir("replay");
  auto store = std::make_shared<ReplayStore>(dir, true);
  PromptRequest request;
  request.template_id = "greet";
  request.rendered = "Hello";
  ReplayRecord record;
  record.fingerprint = fingerprint(request);
  record.template_id = request.template_id;
  record.rendered_sha = sha256_hex(request.rendered);
  record.response_text = "stored";
  store->put(record);

  auto provider = make_replay_provider(store);
  const Completion hit = provider->complete(request);
  CHECK(hit.text == "stored");
  CHECK(hit.cache_hit);

  PromptRequest other = request;
  other.rendered = "Different";
  try {
    provider->complete(other);
    FAIL("expected a replay miss");
  } catch (const GatewayError& ex) {
    CHECK(std::string(ex.what()).find(fingerprint(other)) != std::string::npos);
  }
}

namespace {

class CountingProvider final : public Provider {
 public:
  std::string id() const override { return "counting"; }
  Completion complete(const PromptRequest& request) override {
    ++calls;
    Completion c;
    c.text = "reply to " + request.rendered;
    c.provider_id = id();
    return c;
  }
  int calls = 0;
};

}  // namespace

TEST_CASE("record mode serves the second identical request from the store") {
  const auto dir = temp_dir("record");
  auto store = std::make_shared<ReplayStore>(dir, true);
  auto counting = std::make_unique<CountingProvider>();
  CountingProvider* counter = counting.get();
  auto provider = make_record_provider(store, std::move(counting));

  PromptRequest request;
  request.template_id = "greet";
  request.rendered = "Hello";

  const Completion first = provider->complete(request);
  CHECK(!first.cache_hit);
  const Completion second = provider->complete(request);
  CHECK(second.cache_hit);
  CHECK(first.text == second.text);
  CHECK(counter->calls == 1);

  // a fresh replay provider over the same directory serves it too
  auto replay = make_replay_provider(std::make_shared<ReplayStore>(dir));
  CHECK(replay->complete(request).text == first.text);
}

TEST_CASE("http provider retries transient failures with backoff") {
  std::atomic<int> hits{0};
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    if (n < 3) {
      res.status = 500;
      res.set_content("transient", "text/plain");
      return;
    }
    nlohmann::json body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "test-model");
    CHECK(body["temperature"].get<double>() == 0.0);
    nlohmann::json reply = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port);
  config.model = "test-model";
  config.max_attempts = 3;
  config.backoff_base_ms = 5;
  auto provider = make_http_provider(config);

  PromptRequest request;
  request.template_id = "greet";
  request.rendered = "ping";
  const Completion completion = provider->complete(request);
  CHECK(completion.text == "pong");
  CHECK(hits == 3);

  server.stop();
  server_thread.join();
}

TEST_CASE("http provider gives up after max attempts") {
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port);
  config.max_attempts = 2;
  config.backoff_base_ms = 1;
  auto provider = make_http_provider(config);

  PromptRequest request;
  request.rendered = "ping";
  CHECK_THROWS_AS(static_cast<void>(provider->complete(request)), GatewayError);

  server.stop();
  server_thread.join();
}

TEST_CASE("gateway is safe for concurrent replay reads") {
  const auto dir = temp_dir("concurrent");
  auto store = std::make_shared<ReplayStore>(dir, true);
  std::vector<PromptRequest> requests;
  for (int i = 0; i < 16; ++i) {
    PromptRequest request;
    request.template_id = "greet";
    request.rendered = "msg " + std::to_string(i);
    ReplayRecord record;
    record.fingerprint = fingerprint(request);
    record.template_id = request.template_id;
    record.response_text = "echo " + std::to_string(i);
    store->put(record);
    requests.push_back(std::move(request));
  }
  Gateway gateway(PromptCatalog(), make_replay_provider(std::make_shared<ReplayStore>(dir)));

  std::atomic<int> failures{0};
  parallel_for_indexed(requests.size(), 8, [&](std::size_t i) {
    const Completion c = gateway.complete(requests[i]);
    if (c.text != "echo " + std::to_string(i)) ++failures;
  });
  CHECK(failures == 0);
}
