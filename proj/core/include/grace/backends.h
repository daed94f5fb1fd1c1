#pragma once

// Prediction backends. Every backend takes an InsertionPrompt and returns
// up to n rank-ordered predictions, each parsed with parse_completion and
// deduplicated after whitespace normalization (best rank kept).
//
//   Mirror  line-literal edit transfer read back out of the prompt; offline
//   Echo    returns the current Before lines unchanged (null model)
//   Remote  HTTPS JSON insertion API, see RemoteInsertionBackend

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grace/edit_model.h"
#include "grace/prompting.h"

namespace grace {

struct InferenceParams {
  int n = 5;
  double temperature = 0.1;
  int max_tokens = 256;
  std::string stop{kStopMarker};
  std::optional<int> beam_width = 5;  // consulted by seq2seq-style backends only
};

// Throws DataError if n < 1, temperature < 0 or max_tokens < 1.
void validate(const InferenceParams& params);

enum class BackendKind { kRemoteInsertion, kMirror, kEcho };
std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct RetryPolicy {
  int max_attempts = 4;
  int base_backoff_ms = 250;
};

inline constexpr std::string_view kApiKeyEnv = "GRACE_API_KEY";

struct BackendConfig {
  BackendKind kind = BackendKind::kMirror;
  std::optional<std::string> endpoint;  // required for kRemoteInsertion
  std::optional<std::string> model_name;
  int max_concurrency = 4;
  RetryPolicy retry;
  int timeout_ms = 60000;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Safe to call concurrently.
  virtual std::vector<Prediction> predict(const InsertionPrompt& prompt,
                                          const InferenceParams& params) = 0;
  virtual std::string name() const = 0;
};

// Throws DataError for an invalid config (e.g. remote without endpoint).
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

std::vector<Prediction> predict(const BackendConfig& cfg, const InsertionPrompt& prompt,
                                const InferenceParams& params);

// Parses raw completions, drops whitespace-equivalent duplicates and assigns
// dense ranks 1..k, k <= n.
std::vector<Prediction> rank_completions(std::span<const std::string> raw,
                                         std::span<const std::optional<double>> scores,
                                         const InferenceParams& params);

// Line-literal edit transfer. Each context edit is line-diffed into hunks;
// inside a hunk the i-th before line maps to the i-th after line, and the
// last before line also takes any surplus after lines. A line of `before`
// whose normalized text matches a mapped line is replaced by its image
// (earliest context edit wins); other lines pass through.
Lines mirror_transform(std::span<const Edit> ctx, const Lines& before);

class MirrorBackend final : public Backend {
 public:
  std::vector<Prediction> predict(const InsertionPrompt& prompt,
                                  const InferenceParams& params) override;
  std::string name() const override { return "mirror"; }
};

class EchoBackend final : public Backend {
 public:
  std::vector<Prediction> predict(const InsertionPrompt& prompt,
                                  const InferenceParams& params) override;
  std::string name() const override { return "echo"; }
};

// Counting semaphore bounding in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& l) : l_(&l) { l_->acquire(); }
    ~Slot() { l_->release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter* l_;
  };

  int limit() const { return limit_; }

 private:
  void acquire();
  void release();

  const int limit_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

// POSTs {prompt, suffix, n, temperature, max_tokens, stop[, model]} to the
// endpoint with `Authorization: Bearer $GRACE_API_KEY`. Accepts either a
// JSON array of choices or an object with "choices"; each choice is a string
// or an object with "text" (and optionally a numeric "score").
//
// Transient failures (connection errors, 408, 429, 5xx) are retried with
// exponential backoff plus jitter up to retry.max_attempts. 401/403 raise
// AuthError, other 4xx BackendError, exhausted retries TransportError.
class RemoteInsertionBackend final : public Backend {
 public:
  explicit RemoteInsertionBackend(BackendConfig cfg);

  std::vector<Prediction> predict(const InsertionPrompt& prompt,
                                  const InferenceParams& params) override;
  std::string name() const override { return "remote"; }

  // One logical call including retries; returns the successful body.
  std::string call(const InsertionPrompt& prompt, const InferenceParams& params);

  static std::string request_body(const BackendConfig& cfg, const InsertionPrompt& prompt,
                                  const InferenceParams& params);

 private:
  BackendConfig cfg_;
  std::string base_url_;
  std::string path_;
  ConcurrencyLimiter limiter_;
};

// Convenience wrapper: builds a RemoteInsertionBackend and performs one call.
std::string remote_insertion_call(const BackendConfig& cfg, const InsertionPrompt& prompt,
                                  const InferenceParams& params);

}  // namespace grace
