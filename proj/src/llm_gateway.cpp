#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rulecheck/llm_gateway.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <regex>
#include <thread>

#include <json.hpp>

#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

std::string fingerprint(const PromptRequest& request) {
  char params[64];
  std::snprintf(params, sizeof(params), "%.6f\n%d", request.params.temperature,
                request.params.max_tokens);
  std::string canonical = "rulecheck-prompt-v1\n";
  canonical += request.template_id;
  canonical += '\n';
  canonical += params;
  canonical += '\n';
  canonical += request.rendered;
  return sha256_hex(canonical);
}

PromptCatalog::PromptCatalog(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw GatewayError("prompt catalog directory not found: " + dir.string());
  }
  for (const auto& it : std::filesystem::directory_iterator(dir)) {
    if (it.is_regular_file() && it.path().extension() == ".txt") {
      templates_[it.path().stem().string()] = read_file(it.path());
    }
  }
}

const std::string& PromptCatalog::text(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw GatewayError("unknown template id: " + id);
  return it->second;
}

namespace {
const std::regex kPlaceholder(R"(\{\{([A-Za-z0-9_]+)\}\})");
}

std::vector<std::string> PromptCatalog::placeholders(const std::string& id) const {
  const std::string& body = text(id);
  std::vector<std::string> names;
  auto begin = std::sregex_iterator(body.begin(), body.end(), kPlaceholder);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const std::string name = (*it)[1];
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  return names;
}

PromptRequest PromptCatalog::render(const std::string& id,
                                    const std::map<std::string, std::string>& bindings,
                                    const DecodingParams& params) const {
  const std::string& body = text(id);
  const auto declared = placeholders(id);
  for (const auto& name : declared) {
    if (!bindings.count(name)) {
      throw GatewayError("missing binding \"" + name + "\" for template " + id);
    }
  }
  for (const auto& [name, _] : bindings) {
    if (std::find(declared.begin(), declared.end(), name) == declared.end()) {
      throw GatewayError("binding \"" + name + "\" is not a placeholder of template " + id);
    }
  }

  // Single pass: binding values are emitted verbatim, never re-scanned.
  std::string rendered;
  rendered.reserve(body.size());
  std::size_t pos = 0;
  auto begin = std::sregex_iterator(body.begin(), body.end(), kPlaceholder);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    rendered.append(body, pos, static_cast<std::size_t>(m.position(0)) - pos);
    rendered.append(bindings.at(m[1].str()));
    pos = static_cast<std::size_t>(m.position(0)) + static_cast<std::size_t>(m.length(0));
  }
  rendered.append(body, pos, body.size() - pos);

  PromptRequest request;
  request.template_id = id;
  request.bindings = bindings;
  request.rendered = std::move(rendered);
  request.params = params;
  return request;
}

ReplayStore::ReplayStore(std::filesystem::path dir, bool create) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    if (!create) throw GatewayError("replay store directory not found: " + dir_.string());
    std::filesystem::create_directories(dir_);
  }
  for (const auto& it : std::filesystem::directory_iterator(dir_)) {
    if (!it.is_regular_file() || it.path().extension() != ".json") continue;
    ordered_json j = ordered_json::parse(read_file(it.path()), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw GatewayError("corrupt replay record: " + it.path().string());
    }
    ReplayRecord rec;
    rec.fingerprint = j.value("fingerprint", std::string());
    rec.template_id = j.value("template_id", std::string());
    rec.rendered_sha = j.value("rendered_sha", std::string());
    rec.response_text = j.value("response_text", std::string());
    rec.recorded_at = j.value("recorded_at", std::string());
    if (rec.fingerprint.empty()) {
      throw GatewayError("replay record missing fingerprint: " + it.path().string());
    }
    entries_[rec.fingerprint] = std::move(rec);
  }
}

std::size_t ReplayStore::size() const {
  std::lock_guard<std::mutex> lock(write_mutex_);
  return entries_.size() + added_.size();
}

std::optional<ReplayRecord> ReplayStore::get(const std::string& fp) const {
  auto it = entries_.find(fp);
  if (it != entries_.end()) return it->second;
  std::lock_guard<std::mutex> lock(write_mutex_);
  auto added = added_.find(fp);
  if (added != added_.end()) return added->second;
  return std::nullopt;
}

void ReplayStore::put(const ReplayRecord& record) {
  ordered_json j;
  j["fingerprint"] = record.fingerprint;
  j["template_id"] = record.template_id;
  j["rendered_sha"] = record.rendered_sha;
  j["response_text"] = record.response_text;
  j["recorded_at"] = record.recorded_at;
  std::lock_guard<std::mutex> lock(write_mutex_);
  write_file(dir_ / (record.fingerprint + ".json"), j.dump(2) + "\n");
  added_[record.fingerprint] = record;
}

namespace {

std::string now_iso8601() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw GatewayError("http provider needs an endpoint");
  }

  std::string id() const override { return "http:" + config_.model; }

  Completion complete(const PromptRequest& request) override {
    ordered_json body;
    body["model"] = config_.model;
    body["messages"] = ordered_json::array({ordered_json{{"role", "user"},
                                                         {"content", request.rendered}}});
    body["temperature"] = request.params.temperature;
    body["max_tokens"] = request.params.max_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, config_.max_attempts); ++attempt) {
      if (attempt > 1) {
        const int delay = config_.backoff_base_ms * (1 << (attempt - 2));
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      httplib::Client client(config_.endpoint);
      client.set_connection_timeout(10, 0);
      client.set_read_timeout(120, 0);
      auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = "connection failure (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw GatewayError("provider rejected request: status " + std::to_string(res->status) +
                           " body: " + res->body);
      }
      return parse_response(res->body, start);
    }
    throw GatewayError("retries exhausted after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
  }

 private:
  Completion parse_response(const std::string& body,
                            std::chrono::steady_clock::time_point start) const {
    ordered_json j = ordered_json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty()) {
      throw GatewayError("malformed provider response: " + body.substr(0, 200));
    }
    const auto& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content")) {
      throw GatewayError("malformed provider response: missing message content");
    }
    Completion completion;
    const auto& content = first["message"]["content"];
    completion.text = content.is_null() ? std::string() : content.get<std::string>();
    completion.refusal = completion.text.empty();
    completion.provider_id = id();
    completion.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return completion;
  }

  HttpConfig config_;
};

class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(std::shared_ptr<ReplayStore> store) : store_(std::move(store)) {}

  std::string id() const override { return "replay"; }

  Completion complete(const PromptRequest& request) override {
    const std::string fp = fingerprint(request);
    const auto record = store_->get(fp);
    if (!record) {
      throw GatewayError("replay miss for fingerprint " + fp + " (template " +
                         request.template_id + ")");
    }
    Completion completion;
    completion.text = record->response_text;
    completion.provider_id = id();
    completion.cache_hit = true;
    completion.refusal = completion.text.empty();
    return completion;
  }

 private:
  std::shared_ptr<ReplayStore> store_;
};

class RecordProvider final : public Provider {
 public:
  RecordProvider(std::shared_ptr<ReplayStore> store, std::unique_ptr<Provider> inner)
      : store_(std::move(store)), inner_(std::move(inner)) {}

  std::string id() const override { return "record(" + inner_->id() + ")"; }

  Completion complete(const PromptRequest& request) override {
    const std::string fp = fingerprint(request);
    if (const auto record = store_->get(fp)) {
      Completion completion;
      completion.text = record->response_text;
      completion.provider_id = id();
      completion.cache_hit = true;
      completion.refusal = completion.text.empty();
      return completion;
    }
    Completion completion = inner_->complete(request);
    ReplayRecord record;
    record.fingerprint = fp;
    record.template_id = request.template_id;
    record.rendered_sha = sha256_hex(request.rendered);
    record.response_text = completion.text;
    record.recorded_at = now_iso8601();
    store_->put(record);
    return completion;
  }

 private:
  std::shared_ptr<ReplayStore> store_;
  std::unique_ptr<Provider> inner_;
};

}  // namespace

std::unique_ptr<Provider> make_http_provider(const HttpConfig& config) {
  return std::make_unique<HttpProvider>(config);
}

std::unique_ptr<Provider> make_replay_provider(std::shared_ptr<ReplayStore> store) {
  return std::make_unique<ReplayProvider>(std::move(store));
}

std::unique_ptr<Provider> make_record_provider(std::shared_ptr<ReplayStore> store,
                                               std::unique_ptr<Provider> inner) {
  return std::make_unique<RecordProvider>(std::move(store), std::move(inner));
}

}  // namespace rulecheck
