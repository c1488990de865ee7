#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rulecheck {

class GatewayError : public std::runtime_error {
 public:
  explicit GatewayError(const std::string& what) : std::runtime_error(what) {}
};

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 4096;

  bool operator==(const DecodingParams&) const = default;
};

struct PromptRequest {
  std::string template_id;
  std::map<std::string, std::string> bindings;
  std::string rendered;
  DecodingParams params;
};

struct Completion {
  std::string text;
  std::string provider_id;
  std::chrono::milliseconds latency{0};
  bool cache_hit = false;
  bool refusal = false;  // provider returned an empty message
};

/// Stable request identity: sha256 over template id, rendered text and
/// decoding params in a fixed canonical serialization.
std::string fingerprint(const PromptRequest& request);

/// Template texts live as files `<id>.txt` in a catalog directory.
/// Placeholders are written `{{name}}`; render() substitutes every
/// occurrence and rejects unbound or unknown placeholders.
class PromptCatalog {
 public:
  PromptCatalog() = default;
  explicit PromptCatalog(const std::filesystem::path& dir);

  bool has(const std::string& id) const { return templates_.count(id) > 0; }
  const std::string& text(const std::string& id) const;
  std::vector<std::string> placeholders(const std::string& id) const;

  PromptRequest render(const std::string& id, const std::map<std::string, std::string>& bindings,
                       const DecodingParams& params = {}) const;

 private:
  std::map<std::string, std::string> templates_;
};

struct ReplayRecord {
  std::string fingerprint;
  std::string template_id;
  std::string rendered_sha;
  std::string response_text;
  std::string recorded_at;
};

/// One JSON file per fingerprint under a directory. Reads come from an
/// in-memory snapshot loaded at construction; writes are serialized.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir, bool create = false);

  std::optional<ReplayRecord> get(const std::string& fp) const;
  void put(const ReplayRecord& record);
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::unordered_map<std::string, ReplayRecord> entries_;  // sealed snapshot
  std::unordered_map<std::string, ReplayRecord> added_;    // record-mode overlay
  mutable std::mutex write_mutex_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual Completion complete(const PromptRequest& request) = 0;
  virtual std::string id() const = 0;
};

struct HttpConfig {
  std::string endpoint;  // e.g. "http://localhost:8089"
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_attempts = 3;
  int backoff_base_ms = 250;
};

/// OpenAI-compatible /v1/chat/completions client with bounded exponential
/// backoff on transient failures (connect errors, 429, 5xx).
std::unique_ptr<Provider> make_http_provider(const HttpConfig& config);

/// Serves completions from a sealed store; a miss is an error naming the
/// fingerprint.
std::unique_ptr<Provider> make_replay_provider(std::shared_ptr<ReplayStore> store);

/// Delegates misses to `inner` and persists the result.
std::unique_ptr<Provider> make_record_provider(std::shared_ptr<ReplayStore> store,
                                               std::unique_ptr<Provider> inner);

/// Uniform chat-completion access: template rendering plus a provider.
/// Safe for concurrent use by pipeline workers.
class Gateway {
 public:
  Gateway(PromptCatalog catalog, std::unique_ptr<Provider> provider,
          DecodingParams default_params = {})
      : catalog_(std::move(catalog)),
        provider_(std::move(provider)),
        default_params_(default_params) {}

  const PromptCatalog& catalog() const { return catalog_; }

  PromptRequest render(const std::string& id,
                       const std::map<std::string, std::string>& bindings) const {
    return catalog_.render(id, bindings, default_params_);
  }

  PromptRequest render(const std::string& id, const std::map<std::string, std::string>& bindings,
                       const DecodingParams& params) const {
    return catalog_.render(id, bindings, params);
  }

  Completion complete(const PromptRequest& request) { return provider_->complete(request); }

  Completion run(const std::string& id, const std::map<std::string, std::string>& bindings) {
    return complete(render(id, bindings));
  }

 private:
  PromptCatalog catalog_;
  std::unique_ptr<Provider> provider_;
  DecodingParams default_params_;
};

}  // namespace rulecheck
