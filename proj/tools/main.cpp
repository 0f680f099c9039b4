#include <iostream>

#include "common.hpp"
#include "hrshift/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Change point analysis of hemodynamic responses"};
  app.require_subcommand(1);
  cli::register_subject_commands(app);
  cli::register_group_commands(app);
  cli::register_pipeline_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kConfigError;
  } catch (const hrshift::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const hrshift::ArgumentError& e) {
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const hrshift::PosiFailure& e) {
    std::cerr << "post-selection inference failed: " << e.what() << '\n';
    return cli::kPosiFailure;
  } catch (const hrshift::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return cli::kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return cli::kDataError;
  }
  return cli::kOk;
}
