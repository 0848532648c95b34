#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "options.hpp"

namespace pltr::cli {

// Bad or missing arguments detected after parsing; reported like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Options> options;
  std::function<void(Options&)> run;
};

std::vector<Command> register_commands(CLI::App& app);

}  // namespace pltr::cli
