#include "cli/config_json.h"

#include <nlohmann/json.hpp>

namespace grace::cli {

namespace {

using json = nlohmann::json;

std::string scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

void flatten(const json& obj, std::vector<std::string>& parents,
             std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : obj.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar(value));
    }
    out.push_back(std::move(item));
  }
}

}  // namespace

std::string ConfigJSON::to_config(const CLI::App* app, bool default_also, bool,
                                  std::string) const {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options({})) {
    if (!opt->get_configurable() || opt->get_single_name().empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[opt->get_single_name()] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (default_also && !opt->get_default_str().empty()) {
      j[opt->get_single_name()] = opt->get_default_str();
    }
  }
  return j.dump(2);
}

std::vector<CLI::ConfigItem> ConfigJSON::from_config(std::istream& input) const {
  json j;
  try {
    j = json::parse(input);
  } catch (const json::exception& e) {
    throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
  std::vector<CLI::ConfigItem> out;
  std::vector<std::string> parents;
  flatten(j, parents, out);
  return out;
}

}  // namespace grace::cli
