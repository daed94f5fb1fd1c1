#include "grace/artifacts.h"

#include <fstream>
#include <nlohmann/json.hpp>

#include "grace/errors.h"

namespace grace {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

template <typename Fn>
auto read_each(const std::filesystem::path& path, Fn decode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<decltype(decode(std::string_view{}, std::size_t{}))> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(decode(text, line));
  }
  return out;
}

json parse_object(std::string_view text, std::size_t line) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaError(line, "expected a JSON object");
  return j;
}

std::string required_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw SchemaError(line, std::string("missing string field '") + key + "'");
  }
  return j[key].get<std::string>();
}

std::optional<std::string> optional_error(const json& j) {
  if (j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
  return std::nullopt;
}

}  // namespace

std::string encode_prompt(const PromptRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["style"] = to_string(r.style);
  j["prompt"] = r.prompt.prompt;
  j["suffix"] = r.prompt.suffix;
  if (r.error) j["error"] = *r.error;
  return j.dump();
}

PromptRecord decode_prompt(std::string_view text, std::size_t line) {
  const json j = parse_object(text, line);
  PromptRecord r;
  r.id = required_string(j, "id", line);
  const auto style = parse_prompt_style(required_string(j, "style", line));
  if (!style) throw SchemaError(line, "unknown prompt style");
  r.style = *style;
  r.prompt.prompt = required_string(j, "prompt", line);
  r.prompt.suffix = required_string(j, "suffix", line);
  r.error = optional_error(j);
  return r;
}

std::vector<PromptRecord> read_prompts(const std::filesystem::path& path) {
  return read_each(path, decode_prompt);
}

std::string encode_predictions(const PredictionRecord& r) {
  ojson j;
  j["id"] = r.id;
  ojson preds = ojson::array();
  for (const Prediction& p : r.set.predictions) {
    ojson pj;
    pj["rank"] = p.rank;
    pj["text"] = p.text;
    if (p.score) pj["score"] = *p.score;
    preds.push_back(std::move(pj));
  }
  j["predictions"] = std::move(preds);
  if (r.set.error) j["error"] = *r.set.error;
  return j.dump();
}

PredictionRecord decode_predictions(std::string_view text, std::size_t line) {
  const json j = parse_object(text, line);
  PredictionRecord r;
  r.id = required_string(j, "id", line);
  if (!j.contains("predictions") || !j["predictions"].is_array()) {
    throw SchemaError(line, "missing array field 'predictions'");
  }
  try {
    for (const auto& pj : j["predictions"]) {
      Prediction p;
      p.rank = pj.at("rank").get<int>();
      p.text = pj.at("text").get<Lines>();
      if (pj.contains("score") && pj["score"].is_number()) p.score = pj["score"].get<double>();
      r.set.predictions.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw SchemaError(line, std::string("bad prediction: ") + e.what());
  }
  r.set.error = optional_error(j);
  return r;
}

PredictionTable read_predictions(const std::filesystem::path& path) {
  PredictionTable table;
  for (auto& r : read_each(path, decode_predictions)) {
    const std::string id = r.id;
    if (!table.emplace(id, std::move(r.set)).second) {
      throw SchemaError(0, "duplicate prediction id '" + id + "'");
    }
  }
  return table;
}

std::string encode_finetune(const std::string& id, const FinetuneRecord& r) {
  ojson j;
  j["id"] = id;
  j["input"] = r.input;
  j["target"] = r.target;
  return j.dump();
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  out.close();
  if (out.fail()) throw DataError("write failed: " + path.string());
}

}  // namespace grace
