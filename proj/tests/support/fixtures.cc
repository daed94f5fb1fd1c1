#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "fixtures.h"

#include <httplib.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cli/app.h"
#include "grace/diffing.h"
#include "grace/subprocess.h"

#ifndef GRACE_TEST_DATA_DIR
#error "GRACE_TEST_DATA_DIR must be defined"
#endif

namespace grace::testing {

namespace {

const Lines kProjectionV1 = {
    "using System;",
    "using System.Collections.Generic;",
    "using System.Linq.Expressions;",
    "",
    "private Expression BindProjection(MethodCallExpression methodCallExpression)",
    "{",
    "    // <e1>..<e6> stand for elided subexpressions",
    "    var originalIndex = (int)((ConstantExpression)<e1>[1]).Value;",
    "",
    "    var indexOffset = <e2> ? <e3> : <e4>;",
    "",
    "    var property = (IProperty)((ConstantExpression)<e1>[2]).Value;",
    "    var projectionIndex = <e5> + <e6>;",
    "",
    "    return BindProperty(property, projectionIndex);",
    "}",
};

Lines projection_v2_lines() {
  Lines v = kProjectionV1;
  v[7] = "    var property = (int)((ConstantExpression)<e1>[2]).Value;";
  v[9] = "    var propertyProjectionMap = <e2> ? (IDictionary<IProperty,int>)<e3> : <e4>;";
  return v;
}

EditProvenance projection_provenance(std::int64_t order) {
  EditProvenance p;
  p.repo_id = "efcore-sample";
  p.file_path = "src/ProjectionBinder.cs";
  p.revision_id = "v" + std::to_string(order + 2);
  p.order_index = order;
  return p;
}

}  // namespace

Version projection_v1() { return Version(kProjectionV1); }
Version projection_v2() { return Version(projection_v2_lines()); }

Version projection_v3() {
  Lines v = projection_v2_lines();
  v.erase(v.begin() + 11, v.begin() + 13);
  v.insert(v.begin() + 11, projection_truth().front());
  return Version(v);
}

Lines projection_truth() { return {"    var projectionIndex = propertyProjectionMap[property];"}; }

Lines projection_wrong_prediction() {
  return {"    var projectionIndex = (int)( (ConstantExpression)methodCallExpression.Arguments[1] ).Value;"};
}

Example projection_example() {
  Example ex;
  ex.id = "projection";
  Edit ctx = diff_versions(projection_v1(), projection_v2()).at(0);
  ctx.provenance = projection_provenance(0);
  Edit cur = diff_versions(projection_v2(), projection_v3()).at(0);
  cur.provenance = projection_provenance(1);
  ex.current = cur;
  ex.ctx_edits = {ctx};
  ex.source = projection_v2();
  ex.future_versions = std::vector<Version>{projection_v3()};
  return ex;
}

Example nunit_example() {
  const Lines v1 = {
      "using NUnit.Framework;",
      "",
      "public class ParserTests",
      "{",
      "    [Test]",
      "    public void ParsesEmpty() { }",
      "",
      "    [ Test ]",
      "    public void ParsesNested() { }",
      "}",
  };
  Lines v2 = v1;
  v2[0] = "using Xunit;";
  v2[4] = "    [Fact]";
  Lines v3 = v2;
  v3[7] = "    [Fact]";
  GranularityConfig gran;
  gran.merge_gap = 4;  // one edit covering the using directive and first attribute
  Example ex;
  ex.id = "nunit";
  ex.ctx_edits = diff_versions(Version(v1), Version(v2), gran);
  ex.current = diff_versions(Version(v2), Version(v3), gran).at(0);
  for (auto& e : ex.ctx_edits) e.provenance.repo_id = "parser";
  ex.current.provenance.repo_id = "parser";
  ex.current.provenance.order_index = 1;
  return ex;
}

std::vector<Example> replicate_corpus(std::size_t n, std::size_t repos) {
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string k = std::to_string(i);
    Lines parent;
    for (int l = 0; l < 20; ++l) parent.push_back("    var v" + std::to_string(l) + " = Compute(" + k + ");");
    parent[4] = parent[12] = "    Assert.AreEqual(expected" + k + ", actual);";
    Lines child = parent;
    child[4] = child[12] = "    Assert.Equal(actual, expected" + k + ");";
    auto edits = diff_versions(Version(parent), Version(child));
    for (std::size_t e = 0; e < edits.size(); ++e) {
      edits[e].provenance.repo_id = "syn-" + std::to_string(i % repos);
      edits[e].provenance.file_path = "Tests" + k + ".cs";
      edits[e].provenance.revision_id = "rev" + k;
      edits[e].provenance.order_index = static_cast<std::int64_t>(e);
    }
    Example ex;
    ex.id = "syn" + k;
    ex.current = edits.at(1);
    ex.ctx_edits = {edits.at(0)};
    ex.source = Version(parent);
    ex.future_versions = std::vector<Version>{apply_edit(ex.current, Version(parent))};
    out.push_back(std::move(ex));
  }
  return out;
}

std::string random_line(Rng& rng, std::size_t max_tokens) {
  static const char* kWords[] = {"var", "x", "y", "count", "Value", "index", "map", "foo_bar",
                                 "List", "int", "return", "if", "property", "αβ", "k2"};
  static const char* kPunct[] = {"(", ")", "[", "]", "{", "}", ";", ",", ".", "=", "+",
                                 "<", ">", "?", ":", "\"", "'", "/", "*", "-"};
  static const char* kSpace[] = {"", "", " ", " ", "  ", "\t"};
  std::string out;
  if (uniform_index(rng, 4) == 0) out += "    ";
  const std::size_t n = uniform_index(rng, max_tokens + 1);
  for (std::size_t i = 0; i < n; ++i) {
    out += kSpace[uniform_index(rng, std::size(kSpace))];
    switch (uniform_index(rng, 3)) {
      case 0:
        out += kPunct[uniform_index(rng, std::size(kPunct))];
        break;
      case 1:
        out += std::to_string(uniform_index(rng, 1000));
        break;
      default:
        out += kWords[uniform_index(rng, std::size(kWords))];
    }
  }
  return out;
}

Lines random_lines(Rng& rng, std::size_t min_count, std::size_t max_count) {
  Lines out(min_count + uniform_index(rng, max_count - min_count + 1));
  for (auto& l : out) l = random_line(rng);
  return out;
}

std::string random_bytes(Rng& rng, std::size_t max_len) {
  static constexpr std::string_view kAlphabet = "ab \r\n\n\t;x\r\n";
  std::string out(uniform_index(rng, max_len + 1), ' ');
  for (char& c : out) c = kAlphabet[uniform_index(rng, kAlphabet.size())];
  return out;
}

Version mutate(Rng& rng, const Version& v) {
  Lines lines = v.lines();
  const std::size_t ops = 1 + uniform_index(rng, 5);
  for (std::size_t k = 0; k < ops; ++k) {
    const std::size_t pos = uniform_index(rng, lines.size() + 1);
    switch (uniform_index(rng, 3)) {
      case 0:
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(pos), random_line(rng));
        break;
      case 1:
        if (pos < lines.size()) lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(pos));
        break;
      default:
        if (pos < lines.size()) lines[pos] = random_line(rng);
    }
  }
  return v.with_lines(std::move(lines));
}

Example random_example(Rng& rng, const std::string& id) {
  auto random_edit = [&](std::int64_t order) {
    Edit e;
    e.prefix = random_lines(rng, 0, 10);
    e.before = random_lines(rng, 0, 4);
    e.after = random_lines(rng, e.before.empty() ? 1 : 0, 4);
    e.suffix = random_lines(rng, 0, 10);
    e.span.start = e.prefix.size() + uniform_index(rng, 40);
    e.span.end = e.span.start + e.before.size();
    e.provenance.repo_id = "repo" + std::to_string(uniform_index(rng, 3));
    e.provenance.file_path = "f" + std::to_string(uniform_index(rng, 3)) + ".cs";
    e.provenance.revision_id = "r" + std::to_string(uniform_index(rng, 100));
    e.provenance.order_index = order;
    return e;
  };
  Example ex;
  ex.id = id;
  const std::size_t m = uniform_index(rng, 5);
  for (std::size_t i = 0; i < m; ++i) ex.ctx_edits.push_back(random_edit(static_cast<std::int64_t>(i)));
  ex.current = random_edit(static_cast<std::int64_t>(m));
  return ex;
}

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "grace-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, std::string_view text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::filesystem::path data_path(std::string_view name) {
  return std::filesystem::path(GRACE_TEST_DATA_DIR) / name;
}

void clone_toy_repo(const std::filesystem::path& dir) {
  const auto r = run_process(
      {"git", "clone", "-q", "-b", "main", data_path("toy_repo.bundle").string(), dir.string()});
  if (r.exit_code != 0) throw std::runtime_error("git clone failed: " + r.err);
}

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "grace");
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

StubServer::StubServer(std::function<StubResponse(const StubRequest&)> handler)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Post(".*", [handler](const httplib::Request& req, httplib::Response& res) {
    StubRequest sr{req.path, req.body, req.get_header_value("Authorization")};
    const StubResponse out = handler(sr);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("stub server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StubServer::port() const { return impl_->port; }

std::string StubServer::url(std::string_view path) const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + std::string(path);
}

ScopedEnv::ScopedEnv(const char* name, const char* value) : name_(name) {
  if (const char* old = std::getenv(name)) old_ = old;
  if (value) {
    ::setenv(name, value, 1);
  } else {
    ::unsetenv(name);
  }
}

ScopedEnv::~ScopedEnv() {
  if (old_) {
    ::setenv(name_.c_str(), old_->c_str(), 1);
  } else {
    ::unsetenv(name_.c_str());
  }
}

}  // namespace grace::testing
