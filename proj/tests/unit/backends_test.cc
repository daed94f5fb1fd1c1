#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "fixtures.h"
#include "grace/backends.h"
#include "grace/errors.h"

namespace grace {
namespace {

using testing::ScopedEnv;
using testing::StubRequest;
using testing::StubResponse;
using testing::StubServer;

Edit one_line(const std::string& before, const std::string& after) {
  Edit e;
  e.before = {before};
  e.after = {after};
  return e;
}

InsertionPrompt prompt_for(const Example& ex) { return build_tag_prompt(ex, {1u << 20, nullptr}); }

BackendConfig remote_config(const StubServer& server) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kRemoteInsertion;
  cfg.endpoint = server.url();
  cfg.retry = {3, 1};
  cfg.timeout_ms = 5000;
  return cfg;
}

TEST(Mirror, TransfersMatchingLine) {
  Example ex;
  ex.current = one_line("[Test]", "[Fact]");
  ex.ctx_edits = {one_line("[Test]", "[Fact]")};
  const auto preds = predict(BackendConfig{}, prompt_for(ex), InferenceParams{});
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0].rank, 1);
  EXPECT_EQ(preds[0].text, (Lines{"[Fact]"}));
}

TEST(Mirror, NunitScenarioDoesNotGeneralize) {
  const Example ex = testing::nunit_example();
  EXPECT_EQ(mirror_transform(ex.ctx_edits, {"using NUnit.Framework;"}), (Lines{"using Xunit;"}));
  // "[ Test ]" matches no line the context rewrote
  const auto preds = predict(BackendConfig{}, prompt_for(ex), InferenceParams{});
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0].text, ex.current.before);
}

TEST(Mirror, TransformRules) {
  EXPECT_EQ(mirror_transform({}, {"a", "b"}), (Lines{"a", "b"}));
  const std::vector<Edit> ctx = {one_line("int a;", "long a;"), one_line("int b;", "short b;")};
  EXPECT_EQ(mirror_transform(ctx, {"int a;", "x", "  int   b;"}), (Lines{"long a;", "x", "short b;"}));
  // earliest context edit wins
  const std::vector<Edit> tie = {one_line("f();", "g();"), one_line("f();", "h();")};
  EXPECT_EQ(mirror_transform(tie, {"f();"}), (Lines{"g();"}));
  // deletion and surplus after lines
  Edit del;
  del.before = {"keep", "drop"};
  del.after = {"keep"};
  EXPECT_EQ(mirror_transform(std::vector<Edit>{del}, {"drop", "other"}), (Lines{"other"}));
  Edit grow;
  grow.before = {"x"};
  grow.after = {"y", "z"};
  EXPECT_EQ(mirror_transform(std::vector<Edit>{grow}, {"x"}), (Lines{"y", "z"}));
}

TEST(Echo, ReturnsBefore) {
  const Example ex = testing::projection_example();
  BackendConfig cfg;
  cfg.kind = BackendKind::kEcho;
  const auto preds = predict(cfg, prompt_for(ex), InferenceParams{});
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0].text, ex.current.before);
}

TEST(Mirror, WorksOnCommentPrompts) {
  Example ex;
  ex.current = one_line("[Test]", "[Fact]");
  ex.ctx_edits = {one_line("[Test]", "[Fact]")};
  const InsertionPrompt p{build_comment_prompt(ex), ""};
  EXPECT_EQ(MirrorBackend().predict(p, {})[0].text, (Lines{"[Fact]"}));
}

TEST(RankCompletions, DedupAndDenseRanks) {
  const std::vector<std::string> raw = {"a = 1;\n</After>", "a  =  1;", "b;", "c;", "d;", "e;", "f;"};
  const std::vector<std::optional<double>> scores(raw.size());
  InferenceParams params;
  params.n = 5;
  const auto preds = rank_completions(raw, scores, params);
  ASSERT_EQ(preds.size(), 5u);
  EXPECT_TRUE(is_well_formed(preds));
  EXPECT_EQ(preds[0].text, (Lines{"a = 1;"}));
  EXPECT_EQ(preds[1].text, (Lines{"b;"}));
}

TEST(RankCompletions, ScoresOrderChoices) {
  const std::vector<std::string> raw = {"low", "high", "mid"};
  const std::vector<std::optional<double>> scores = {0.1, 0.9, 0.5};
  const auto preds = rank_completions(raw, scores, {});
  ASSERT_EQ(preds.size(), 3u);
  EXPECT_EQ(preds[0].text, (Lines{"high"}));
  EXPECT_EQ(preds[2].text, (Lines{"low"}));
  EXPECT_TRUE(is_well_formed(preds));
}

TEST(InferenceParams, Validation) {
  InferenceParams p;
  EXPECT_NO_THROW(validate(p));
  EXPECT_EQ(p.n, 5);
  EXPECT_DOUBLE_EQ(p.temperature, 0.1);
  EXPECT_EQ(p.stop, "</After>");
  p.n = 0;
  EXPECT_THROW(validate(p), DataError);
  p = {};
  p.temperature = -1;
  EXPECT_THROW(validate(p), DataError);
}

TEST(Remote, RequiresEndpoint) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kRemoteInsertion;
  EXPECT_THROW(make_backend(cfg), DataError);
}

TEST(Remote, RequestBodyCarriesSplitAndParameters) {
  ScopedEnv key("GRACE_API_KEY", "sekret");
  std::mutex mu;
  std::vector<StubRequest> seen;
  StubServer server([&](const StubRequest& r) {
    std::lock_guard lock(mu);
    seen.push_back(r);
    return StubResponse{200, R"({"choices":[{"text":"\nx;\n</After>"},{"text":"y;"}]})"};
  });
  const Example ex = testing::projection_example();
  const InsertionPrompt p = prompt_for(ex);
  auto cfg = remote_config(server);
  cfg.model_name = "insert-model";
  const auto preds = predict(cfg, p, InferenceParams{});
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0].text, (Lines{"x;"}));

  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0].path, "/v1/completions");
  EXPECT_EQ(seen[0].authorization, "Bearer sekret");
  const auto body = nlohmann::json::parse(seen[0].body);
  EXPECT_EQ(body["prompt"], p.prompt);
  EXPECT_EQ(body["suffix"], p.suffix);
  EXPECT_TRUE(body["prompt"].get<std::string>().ends_with("<After>\n"));
  EXPECT_TRUE(body["suffix"].get<std::string>().starts_with("</After>\n"));
  EXPECT_EQ(body["stop"], "</After>");
  EXPECT_EQ(body["n"], 5);
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.1);
  EXPECT_EQ(body["max_tokens"], 256);
  EXPECT_EQ(body["model"], "insert-model");
}

TEST(Remote, RetriesTransientFailures) {
  ScopedEnv key("GRACE_API_KEY", "k");
  std::atomic<int> requests{0};
  StubServer server([&](const StubRequest&) {
    const int n = ++requests;
    if (n <= 2) return StubResponse{503, R"({"error":"overloaded"})"};
    return StubResponse{200, R"(["ok;"])"};
  });
  const auto raw = remote_insertion_call(remote_config(server), prompt_for(testing::projection_example()), {});
  EXPECT_EQ(raw, R"(["ok;"])");
  EXPECT_EQ(requests.load(), 3);
}

TEST(Remote, ExhaustedRetriesAreTransportErrors) {
  ScopedEnv key("GRACE_API_KEY", "k");
  std::atomic<int> requests{0};
  StubServer server([&](const StubRequest&) {
    ++requests;
    return StubResponse{500, "{}"};
  });
  EXPECT_THROW(remote_insertion_call(remote_config(server), prompt_for(testing::projection_example()), {}),
               TransportError);
  EXPECT_EQ(requests.load(), 3);
}

TEST(Remote, RejectedCredentialIsAuthError) {
  ScopedEnv key("GRACE_API_KEY", "bad");
  std::atomic<int> requests{0};
  StubServer server([&](const StubRequest&) {
    ++requests;
    return StubResponse{401, R"({"error":{"message":"invalid key"}})"};
  });
  try {
    remote_insertion_call(remote_config(server), prompt_for(testing::projection_example()), {});
    FAIL() << "expected AuthError";
  } catch (const AuthError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid key"), std::string::npos);
  }
  EXPECT_EQ(requests.load(), 1);
}

TEST(Remote, ClientErrorCarriesProviderMessage) {
  ScopedEnv key("GRACE_API_KEY", "k");
  StubServer server([](const StubRequest&) { return StubResponse{400, R"({"error":"prompt too long"})"}; });
  try {
    remote_insertion_call(remote_config(server), prompt_for(testing::projection_example()), {});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("prompt too long"), std::string::npos);
  }
}

TEST(Remote, MissingCredentialIsAuthError) {
  ScopedEnv key("GRACE_API_KEY", nullptr);
  std::atomic<int> requests{0};
  StubServer server([&](const StubRequest&) {
    ++requests;
    return StubResponse{200, "[]"};
  });
  EXPECT_THROW(remote_insertion_call(remote_config(server), prompt_for(testing::projection_example()), {}),
               AuthError);
  EXPECT_EQ(requests.load(), 0);
}

TEST(Remote, InFlightRequestsBoundedByMaxConcurrency) {
  ScopedEnv key("GRACE_API_KEY", "k");
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  std::atomic<int> total{0};
  StubServer server([&](const StubRequest&) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    ++total;
    return StubResponse{200, R"(["z;"])"};
  });
  auto cfg = remote_config(server);
  cfg.max_concurrency = 3;
  RemoteInsertionBackend backend(cfg);
  const InsertionPrompt p = prompt_for(testing::projection_example());
  std::vector<std::thread> callers;
  for (int t = 0; t < 12; ++t) {
    callers.emplace_back([&] {
      for (int i = 0; i < 3; ++i) EXPECT_EQ(backend.predict(p, {})[0].text, (Lines{"z;"}));
    });
  }
  for (auto& t : callers) t.join();
  EXPECT_EQ(total.load(), 36);
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
}

TEST(Limiter, NeverExceedsLimit) {
  ConcurrencyLimiter limiter(2);
  std::atomic<int> in{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t) {
    ts.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        ConcurrencyLimiter::Slot slot(limiter);
        const int now = ++in;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::yield();
        --in;
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_LE(peak.load(), 2);
}

TEST(BackendKinds, NamesRoundTrip) {
  for (auto k : {BackendKind::kMirror, BackendKind::kEcho, BackendKind::kRemoteInsertion}) {
    EXPECT_EQ(parse_backend_kind(to_string(k)), k);
  }
}

}  // namespace
}  // namespace grace
