#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "newsrec/error.hpp"
#include "newsrec/metrics.hpp"

namespace newsrec {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitArtifactMismatch = 4,
  kExitAlignment = 5,
};

int exit_code_for(ErrorKind kind);

/// Entry point of the `newsrec` tool; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "impression<TAB>id id ...<TAB>score score ..." per line.
void write_recommendation_lists(const std::vector<RecommendationList>& lists, std::ostream& out);
std::vector<RecommendationList> read_recommendation_lists(const std::filesystem::path& path);

}  // namespace newsrec
