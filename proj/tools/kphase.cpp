#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "kphase/cli.hpp"
#include "kphase/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Phase-reference monitoring for a Kennedy-like BPSK receiver"};
  app.set_help_flag("-h,--help");

  std::string command;
  app.add_option("command", command, "simulate | estimate | fisher | fano | discriminate | sweep")
      ->required()
      ->check(CLI::IsMember(kphase::cli::subcommands()));

  std::string config_path;
  std::string replay_path;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--replay", replay_path, "re-run from the comment block of a previous output file");

  std::map<std::string, std::string> flag_values;
  for (const auto& key : kphase::config_keys()) app.add_option("--" + key, flag_values[key]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kphase::cli::kConfigError;
  }

  kphase::ConfigEntries file_entries;
  kphase::ConfigEntries flag_entries;
  try {
    if (!replay_path.empty()) {
      std::ifstream in(replay_path);
      if (!in) throw kphase::ConfigError("cannot open replay file '" + replay_path + "'");
      file_entries = kphase::parse_replay_block(in);
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw kphase::ConfigError("cannot open config file '" + config_path + "'");
      for (auto& [k, v] : kphase::parse_config_text(in)) file_entries[k] = v;
    }
  } catch (const kphase::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kphase::cli::kConfigError;
  }
  for (const auto& key : kphase::config_keys()) {
    if (app.count("--" + key) > 0) flag_entries[key] = flag_values[key];
  }
  return kphase::cli::run(command, file_entries, flag_entries, std::cout, std::cerr);
}
