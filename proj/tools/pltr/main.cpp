#include <iostream>

#include "commands.hpp"
#include "pltr/error.hpp"
#include "pltr/log.hpp"

namespace {

// Exit codes: 2 usage, 3 missing input, 4 validation failure, 5 training failure.
int fail(int code, const std::exception& e) {
  pltr::log::emit(pltr::log::Level::error, "cli.error", {{"message", e.what()}, {"exit_code", code}});
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pltr: few-shot cross-domain NER with type-related feature prompts"};
  app.set_version_flag("--version", PLTR_VERSION);
  app.require_subcommand(1);
  auto commands = pltr::cli::register_commands(app);

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto& c : commands) known = known || c.app->get_name() == argv[1];
    if (!known) {
      std::cerr << "unknown subcommand '" << argv[1] << "'\n\n" << app.help();
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << '\n' << app.help();
    return 2;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      c.run(*c.options);
      return 0;
    } catch (const pltr::cli::UsageError& e) {
      std::cerr << c.app->help();
      return fail(2, e);
    } catch (const pltr::MissingInputError& e) {
      return fail(3, e);
    } catch (const pltr::ValidationError& e) {
      return fail(4, e);
    } catch (const pltr::TrainingError& e) {
      return fail(5, e);
    } catch (const std::exception& e) {
      return fail(1, e);
    }
  }
  return 2;
}
