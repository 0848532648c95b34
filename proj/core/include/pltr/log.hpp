#pragma once

#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pltr::log {

enum class Level { debug, info, warning, error };

using Sink = std::function<void(const nlohmann::json& event)>;

// Events are emitted as line-delimited JSON: {"level": ..., "event": ..., ...fields}.
void set_sink(Sink sink);
void set_min_level(Level level);
void emit(Level level, std::string_view event, nlohmann::json fields = nlohmann::json::object());

inline void info(std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
  emit(Level::info, event, std::move(fields));
}
inline void warn(std::string_view event, nlohmann::json fields = nlohmann::json::object()) {
  emit(Level::warning, event, std::move(fields));
}

}  // namespace pltr::log
