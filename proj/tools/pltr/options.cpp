#include "options.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pltr/error.hpp"

namespace pltr::cli {
namespace {

nlohmann::json convert(const std::string& key, const std::string& text, const nlohmann::json& fallback) {
  try {
    std::size_t used = 0;
    switch (fallback.type()) {
      case nlohmann::json::value_t::number_float: {
        const double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case nlohmann::json::value_t::number_unsigned:
      case nlohmann::json::value_t::number_integer: {
        if (!text.empty() && text[0] == '-') break;
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case nlohmann::json::value_t::array: {
        nlohmann::json out = nlohmann::json::array();
        std::stringstream in(text);
        std::string item;
        const nlohmann::json element = fallback.empty() ? nlohmann::json("") : fallback.front();
        while (std::getline(in, item, ',')) {
          if (!item.empty()) out.push_back(convert(key, item, element));
        }
        return out;
      }
      default:
        return text;
    }
  } catch (const std::logic_error&) {
  }
  throw ValidationError("invalid value '" + text + "' for --" + flag_name(key));
}

}  // namespace

std::string flag_name(const std::string& key) {
  std::string out = key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

Options::Options(CLI::App* app) : app_(app) {
  app_->add_option("--config", config_path_, "JSON file with settings (flags take precedence)");
}

void Options::add(const std::string& key, nlohmann::json fallback, const std::string& help) {
  Entry e;
  e.fallback = std::move(fallback);
  if (e.fallback.is_boolean()) {
    e.flag = std::make_shared<bool>(false);
    e.option = app_->add_flag("--" + flag_name(key), *e.flag, help);
  } else {
    e.text = std::make_shared<std::string>();
    e.option = app_->add_option("--" + flag_name(key), *e.text, help);
  }
  order_.push_back(key);
  entries_[key] = std::move(e);
}

void Options::add_config_only(const std::string& key, nlohmann::json fallback) {
  Entry e;
  e.fallback = std::move(fallback);
  order_.push_back(key);
  entries_[key] = std::move(e);
}

void Options::set_default(const std::string& key, nlohmann::json value) { entries_.at(key).fallback = std::move(value); }

nlohmann::json Options::read_config() const {
  if (config_path_.empty()) return nlohmann::json::object();
  std::ifstream in(config_path_);
  if (!in) throw MissingInputError("cannot open config '" + config_path_ + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + config_path_ + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config '" + config_path_ + "' must hold a JSON object");
  return j;
}

nlohmann::json Options::resolve() const {
  const nlohmann::json config = read_config();
  for (const auto& [key, value] : config.items()) {
    if (!entries_.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  nlohmann::json out = nlohmann::json::object();
  for (const auto& key : order_) {
    const Entry& e = entries_.at(key);
    nlohmann::json value = e.fallback;
    if (config.contains(key)) {
      if (value.is_object()) {
        value.update(config.at(key));
      } else {
        value = config.at(key);
      }
    }
    if (e.option && e.option->count() > 0) value = e.flag ? nlohmann::json(*e.flag) : convert(key, *e.text, e.fallback);
    out[key] = std::move(value);
  }
  return out;
}

std::string Options::source(const std::string& key) const {
  const Entry& e = entries_.at(key);
  if (e.option && e.option->count() > 0) return "flag";
  if (!config_path_.empty() && read_config().contains(key)) return "config";
  return "default";
}

}  // namespace pltr::cli
