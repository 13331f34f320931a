#pragma once

// Batch front end: gen-data, train, eval, ood-eval, sweep.
//
// Every command accepts --config <file.json> whose keys mirror the long flags
// (dashes become underscores); flags override the file and unknown keys are
// rejected. Each run writes resolved_config.json into --out.

#include <ostream>
#include <string>
#include <vector>

namespace evib::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evib::cli
