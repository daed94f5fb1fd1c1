#pragma once

// JSONL codecs for the intermediate artifacts passed between pipeline stages:
//   prompts      {"id","style","prompt","suffix"[,"error"]}
//   predictions  {"id","predictions":[{"rank","text":[..][,"score"]}][,"error"]}
//   finetune     {"id","input","target"}

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grace/evaluation.h"
#include "grace/prompting.h"

namespace grace {

struct PromptRecord {
  std::string id;
  PromptStyle style = PromptStyle::kTag;
  InsertionPrompt prompt;
  std::optional<std::string> error;  // e.g. the budget could not be met

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

std::string encode_prompt(const PromptRecord& r);
PromptRecord decode_prompt(std::string_view text, std::size_t line = 0);
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);

struct PredictionRecord {
  std::string id;
  PredictionSet set;
};

std::string encode_predictions(const PredictionRecord& r);
PredictionRecord decode_predictions(std::string_view text, std::size_t line = 0);
PredictionTable read_predictions(const std::filesystem::path& path);

std::string encode_finetune(const std::string& id, const FinetuneRecord& r);

// Writes lines (each followed by LF) to `path`, replacing it.
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

}  // namespace grace
