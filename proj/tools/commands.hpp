#ifndef LSTMVIZ_TOOLS_COMMANDS_HPP
#define LSTMVIZ_TOOLS_COMMANDS_HPP

#include <iosfwd>
#include <string>

#include "run_config.hpp"

namespace lstmviz::cli {

enum ExitCode : int { kSuccess = 0, kComputationError = 1, kUsageError = 2 };

/// Writes train/val/test dataset containers under `out`.
void cmd_ingest(const RunConfig& cfg, std::ostream& log);
/// Trains on the containers and writes the model and history.csv.
void cmd_train(const RunConfig& cfg, std::ostream& log);
/// Salience or temporal scores for one sequence, as CSV and SVG.
void cmd_salience(const RunConfig& cfg, std::ostream& log);
/// Score-reduction curves for every configured technique, as CSV and SVG.
void cmd_evaluate(const RunConfig& cfg, std::ostream& log);

/// Runs `command` ("ingest", "train", "salience", "temporal", "evaluate") and
/// maps failures to exit codes, reporting them on `err`.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log,
                std::ostream& err);

}  // namespace lstmviz::cli

#endif  // LSTMVIZ_TOOLS_COMMANDS_HPP
