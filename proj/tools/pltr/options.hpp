#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace pltr::cli {

// Every setting of a subcommand is a key in one JSON object. Its value comes from
// the flag when given, else the --config file, else the built-in default. The type
// of the default decides how a flag string is converted (null defaults stay strings).
class Options {
 public:
  explicit Options(CLI::App* app);

  // Registers --name-with-dashes for the JSON key name_with_underscores.
  void add(const std::string& key, nlohmann::json fallback, const std::string& help);
  // Keys only settable through the config file (nested objects such as "model").
  void add_config_only(const std::string& key, nlohmann::json fallback);

  // Defaults of already registered keys can change before resolution (profiles).
  void set_default(const std::string& key, nlohmann::json value);

  // Throws ValidationError on unknown config keys or unconvertible flag values,
  // MissingInputError when the config file cannot be read.
  nlohmann::json resolve() const;

  // Where a resolved key came from: "flag", "config" or "default".
  std::string source(const std::string& key) const;

  CLI::App* app() const { return app_; }

 private:
  struct Entry {
    nlohmann::json fallback;
    CLI::Option* option = nullptr;
    std::shared_ptr<std::string> text;
    std::shared_ptr<bool> flag;
  };

  nlohmann::json read_config() const;

  CLI::App* app_;
  std::string config_path_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

std::string flag_name(const std::string& key);

}  // namespace pltr::cli
