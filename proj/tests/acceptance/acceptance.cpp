// One PASS/FAIL line per acceptance criterion; measured values follow indented.
// Optional arguments restrict the run to the listed criterion numbers.
#include <cstdio>
#include <cstdlib>
#include <vector>

#include <fmt/format.h>

#include "checks.hpp"

int main(int argc, char** argv) {
  using namespace vwave::verify;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty()) {
    for (int i = 1; i <= criterion_count(); ++i) ids.push_back(i);
  }
  int failed = 0;
  for (int id : ids) {
    const CheckResult r = run_criterion(id);
    fmt::print("{} criterion {:2d}: {} ({:.2f} s)\n", r.pass ? "PASS" : "FAIL", r.id, r.title, r.seconds);
    for (const auto& line : r.details) fmt::print("      {}\n", line);
    std::fflush(stdout);
    failed += !r.pass;
  }
  fmt::print("{} of {} criteria passed\n", ids.size() - failed, ids.size());
  return failed ? 1 : 0;
}
