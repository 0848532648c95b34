#include "pltr/log.hpp"

#include <iostream>
#include <mutex>

namespace pltr::log {
namespace {

std::mutex g_mutex;
Level g_min_level = Level::info;
Sink g_sink;

const char* level_name(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warning: return "warning";
    case Level::error: return "error";
  }
  return "info";
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mutex);
  g_sink = std::move(sink);
}

void set_min_level(Level level) {
  std::lock_guard lock(g_mutex);
  g_min_level = level;
}

void emit(Level level, std::string_view event, nlohmann::json fields) {
  std::lock_guard lock(g_mutex);
  if (level < g_min_level) return;
  nlohmann::json record = nlohmann::json::object();
  record["level"] = level_name(level);
  record["event"] = std::string(event);
  for (auto& [key, value] : fields.items()) record[key] = value;
  if (g_sink) {
    g_sink(record);
  } else {
    std::cerr << record.dump() << '\n';
  }
}

}  // namespace pltr::log
