#pragma once

#include <string>
#include <vector>

namespace vwave::verify {

struct CheckResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  double time_limit = 0.0;
  std::vector<std::string> details;  // measured values, one per line
};

// Criteria 1..11.
int criterion_count();
CheckResult run_criterion(int id);

// Named groups of criteria; "all" selects every criterion.
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);
std::vector<int> suite_criteria(const std::string& name);

}  // namespace vwave::verify
