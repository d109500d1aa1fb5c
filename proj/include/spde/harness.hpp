#pragma once
// experiment drivers behind the CLI. run() validates the config, executes
// the named command, writes its artifacts (a JSON report plus CSV series and
// a noise-path file where one applies) and prints one PASS/FAIL line per
// declared check. replay() re-executes a report's embedded manifest with the
// same seeds and compares every recorded series hash bitwise, so any edit to
// the inputs or artifacts is caught.

#include <iosfwd>
#include <string>
#include <vector>

#include "spde/config.hpp"

namespace spde {

struct RunResult {
  int exit_code = 0;                 // 0 checks pass, 1 a check failed, 2 bad config
  std::vector<std::string> checks;   // the printed PASS/FAIL lines
  std::string report_file;           // main JSON artifact, empty when config was bad
};

RunResult run(const ExperimentConfig& cfg, std::ostream& log);
RunResult run(const ExperimentConfig& cfg);  // logs to stdout

// exit 0 iff every series recorded in the report reproduces bitwise from
// the embedded config and seeds on this platform
int replay(const std::string& report_file, std::ostream& log);
int replay(const std::string& report_file);

}  // namespace spde
