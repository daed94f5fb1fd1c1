#pragma once

#include <CLI11.hpp>

namespace grace::cli {

// JSON configuration files for CLI11. Nested objects map onto subcommand
// sections, e.g. {"jobs": 2, "predict": {"backend": "mirror"}}.
class ConfigJSON : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace grace::cli
