#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "grace/backends.h"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "grace/diffing.h"
#include "grace/errors.h"
#include "grace/text.h"

namespace grace {

void validate(const InferenceParams& params) {
  if (params.n < 1) throw DataError("inference: n must be >= 1");
  if (params.temperature < 0) throw DataError("inference: temperature must be >= 0");
  if (params.max_tokens < 1) throw DataError("inference: max_tokens must be >= 1");
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kRemoteInsertion:
      return "remote";
    case BackendKind::kMirror:
      return "mirror";
    case BackendKind::kEcho:
      break;
  }
  return "echo";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "remote") return BackendKind::kRemoteInsertion;
  if (s == "mirror") return BackendKind::kMirror;
  if (s == "echo") return BackendKind::kEcho;
  return std::nullopt;
}

std::vector<Prediction> rank_completions(std::span<const std::string> raw,
                                         std::span<const std::optional<double>> scores,
                                         const InferenceParams& params) {
  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto score_at = [&](std::size_t i) -> std::optional<double> {
    return i < scores.size() ? scores[i] : std::nullopt;
  };
  // Scored choices first, best score first; provider order otherwise.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto sa = score_at(a);
    const auto sb = score_at(b);
    if (sa && sb) return *sa > *sb;
    return sa.has_value() && !sb.has_value();
  });

  std::vector<Prediction> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i : order) {
    if (static_cast<int>(out.size()) >= params.n) break;
    Lines lines = parse_completion(raw[i], params.stop);
    if (!seen.insert(normalize_ws(join_lines(lines))).second) continue;
    Prediction p;
    p.rank = static_cast<int>(out.size()) + 1;
    p.text = std::move(lines);
    p.score = score_at(i);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mirror / Echo

Lines mirror_transform(std::span<const Edit> ctx, const Lines& before) {
  std::unordered_map<std::string, Lines> image;
  for (const Edit& e : ctx) {
    std::unordered_map<std::string, Lines> local;
    for (const Hunk& h : myers_diff(e.before, e.after)) {
      const std::size_t k = h.a_end - h.a_start;
      const std::size_t m = h.b_end - h.b_start;
      for (std::size_t i = 0; i < k; ++i) {
        std::string key = normalize_ws(e.before[h.a_start + i]);
        if (key.empty()) continue;
        Lines to;
        if (i < m) {
          const std::size_t last = (i + 1 == k) ? m : i + 1;
          to.assign(e.after.begin() + static_cast<std::ptrdiff_t>(h.b_start + i),
                    e.after.begin() + static_cast<std::ptrdiff_t>(h.b_start + last));
        }
        local.try_emplace(std::move(key), std::move(to));
      }
    }
    // Earlier context edits keep precedence.
    for (auto& [key, to] : local) image.try_emplace(key, std::move(to));
  }

  Lines out;
  for (const auto& line : before) {
    const auto it = image.find(normalize_ws(line));
    if (it == image.end()) {
      out.push_back(line);
    } else {
      out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }
  return out;
}

namespace {

ParsedPrompt read_prompt(const InsertionPrompt& prompt) {
  if (auto parsed = parse_tag_prompt(prompt.full())) return *std::move(parsed);
  if (auto parsed = parse_comment_prompt(prompt.full())) return *std::move(parsed);
  throw BackendError("prompt is neither tag-style nor comment-style");
}

std::vector<Prediction> single(const Lines& lines, const InferenceParams& params) {
  const std::string raw = completion_text(lines);
  return rank_completions(std::span<const std::string>(&raw, 1), {}, params);
}

}  // namespace

std::vector<Prediction> MirrorBackend::predict(const InsertionPrompt& prompt,
                                               const InferenceParams& params) {
  const ParsedPrompt parsed = read_prompt(prompt);
  return single(mirror_transform(parsed.ctx_edits, parsed.current.before), params);
}

std::vector<Prediction> EchoBackend::predict(const InsertionPrompt& prompt,
                                             const InferenceParams& params) {
  return single(read_prompt(prompt).current.before, params);
}

// ---------------------------------------------------------------------------
// Remote

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

RemoteInsertionBackend::RemoteInsertionBackend(BackendConfig cfg)
    : cfg_(std::move(cfg)), limiter_(cfg_.max_concurrency) {
  if (!cfg_.endpoint || cfg_.endpoint->empty()) {
    throw DataError("remote backend requires an endpoint URL");
  }
  const std::string& url = *cfg_.endpoint;
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw DataError("endpoint must be an http(s) URL: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  base_url_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

std::string RemoteInsertionBackend::request_body(const BackendConfig& cfg,
                                                 const InsertionPrompt& prompt,
                                                 const InferenceParams& params) {
  nlohmann::ordered_json body;
  if (cfg.model_name) body["model"] = *cfg.model_name;
  body["prompt"] = prompt.prompt;
  body["suffix"] = prompt.suffix;
  body["n"] = params.n;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  body["stop"] = params.stop;
  return body.dump();
}

namespace {

std::string provider_message(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("error")) {
    const auto& e = j["error"];
    if (e.is_string()) return e.get<std::string>();
    if (e.is_object() && e.contains("message") && e["message"].is_string()) {
      return e["message"].get<std::string>();
    }
  }
  return body.substr(0, 200);
}

bool transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string RemoteInsertionBackend::call(const InsertionPrompt& prompt,
                                         const InferenceParams& params) {
  const char* key = std::getenv(std::string(kApiKeyEnv).c_str());
  if (!key || !*key) {
    throw AuthError(std::string("AuthError: environment variable ") + std::string(kApiKeyEnv) +
                    " is not set");
  }
  validate(params);
  const std::string body = request_body(cfg_, prompt, params);
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  const int attempts = std::max(1, cfg_.retry.max_attempts);
  std::string last_failure;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      const long base = static_cast<long>(cfg_.retry.base_backoff_ms) << std::min(attempt - 2, 16);
      const long jitter = cfg_.retry.base_backoff_ms > 0
                              ? static_cast<long>(jitter_rng() % static_cast<std::uint64_t>(
                                                                     cfg_.retry.base_backoff_ms))
                              : 0;
      std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter));
    }
    auto res = [&] {
      ConcurrencyLimiter::Slot slot(limiter_);
      httplib::Client client(base_url_);
      const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      return client.Post(path_, headers, body, "application/json");
    }();
    if (!res) {
      last_failure = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status >= 200 && status < 300) return res->body;
    if (status == 401 || status == 403) {
      throw AuthError("AuthError: credential rejected (HTTP " + std::to_string(status) +
                      "): " + provider_message(res->body));
    }
    if (!transient(status)) {
      throw BackendError("HTTP " + std::to_string(status) + ": " + provider_message(res->body));
    }
    last_failure = "HTTP " + std::to_string(status) + ": " + provider_message(res->body);
  }
  throw TransportError("giving up after " + std::to_string(attempts) +
                       " attempts; last failure: " + last_failure);
}

std::vector<Prediction> RemoteInsertionBackend::predict(const InsertionPrompt& prompt,
                                                        const InferenceParams& params) {
  const std::string body = call(prompt, params);
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BackendError("response is not JSON");
  const nlohmann::json* choices = &j;
  if (j.is_object()) {
    if (!j.contains("choices")) throw BackendError("response has no choices");
    choices = &j["choices"];
  }
  if (!choices->is_array()) throw BackendError("choices is not an array");

  std::vector<std::string> texts;
  std::vector<std::optional<double>> scores;
  for (const auto& c : *choices) {
    if (c.is_string()) {
      texts.push_back(c.get<std::string>());
      scores.emplace_back();
    } else if (c.is_object() && c.contains("text") && c["text"].is_string()) {
      texts.push_back(c["text"].get<std::string>());
      scores.push_back(c.contains("score") && c["score"].is_number()
                           ? std::optional<double>(c["score"].get<double>())
                           : std::nullopt);
    } else {
      throw BackendError("choice without text");
    }
  }
  return rank_completions(texts, scores, params);
}

std::string remote_insertion_call(const BackendConfig& cfg, const InsertionPrompt& prompt,
                                  const InferenceParams& params) {
  return RemoteInsertionBackend(cfg).call(prompt, params);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::kMirror:
      return std::make_unique<MirrorBackend>();
    case BackendKind::kEcho:
      return std::make_unique<EchoBackend>();
    case BackendKind::kRemoteInsertion:
      break;
  }
  return std::make_unique<RemoteInsertionBackend>(cfg);
}

std::vector<Prediction> predict(const BackendConfig& cfg, const InsertionPrompt& prompt,
                                const InferenceParams& params) {
  validate(params);
  return make_backend(cfg)->predict(prompt, params);
}

}  // namespace grace
