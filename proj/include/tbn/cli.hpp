#pragma once

#include <iosfwd>
#include <vector>

#include "tbn/config.hpp"

namespace tbn::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Each command validates `cfg`, writes its outputs plus "effective_config.<command>.json"
/// under cfg.output_dir and reports to `out`. Errors propagate as exceptions.
void cmd_gen(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_eval(const RunConfig& cfg, std::ostream& out);
void cmd_sweep_b(const RunConfig& cfg, std::ostream& out);
/// Returns true when every check passes.
bool cmd_gradcheck(const RunConfig& cfg, std::ostream& out);

/// tbnlab {gen|train|eval|sweep-b|gradcheck} --config PATH [flags]
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace tbn::cli
