#pragma once

#include <ostream>
#include <string>

#include "config.hpp"

namespace vwave::cli {

// Exit codes.
inline constexpr int kOk = 0, kFailure = 1, kUsage = 2;

// Runs (or resumes from `resume`) a point-vortex branch; writes branch.ndjson and profile.csv.
int cmd_continue(const RunConfig& cfg, const std::string& resume, std::ostream& out, std::ostream& err);

// Solves one vortex patch; writes patch.json and boundary.csv.
int cmd_patch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err);

}  // namespace vwave::cli
