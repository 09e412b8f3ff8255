#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

using namespace lstmviz::cli;

namespace {

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lstmviz: train LSTM sequence classifiers and explain their decisions"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "convert MNIST, MIT-BIH or the spike testbed into dataset containers"},
      {"train", "train a model and keep the epoch with the lowest validation loss"},
      {"salience", "explain one sequence with gradient, occlusion, mask or temporal scores"},
      {"temporal", "temporal output scores of one sequence (salience --technique temporal)"},
      {"evaluate", "class-score reduction curves of the salience techniques"},
  };

  std::string config_path;
  std::map<std::string, std::string> given;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value settings file");
    for (const auto& s : setting_table()) {
      const std::string key = s.key;
      std::string names = "--" + dashed(key);
      if (dashed(key) != key) names += ",--" + key;
      CLI::Option* opt = sub->add_option(names, given[key], s.help);
      options[name].emplace_back(key, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig cfg;
  try {
    for (const auto& [key, opt] : options[command])
      if (opt->count() > 0) cfg.set_flag(key, given[key]);
    if (command == "temporal") cfg.set_flag("technique", "temporal");
    if (!config_path.empty()) cfg.apply_file(config_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  std::cout << "lstmviz " << command << '\n';
  if (!config_path.empty()) std::cout << "config file: " << config_path << '\n';
  cfg.print(std::cout);
  return run_command(command, cfg, std::cout, std::cerr);
}
