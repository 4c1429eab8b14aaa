#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "vwave/point_vortex.hpp"
#include "vwave/vortex_patch.hpp"

namespace vwave::cli {

// Bad input: unknown key, malformed value, violated invariant. Maps to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Kind { Number, Integer, Boolean, Text };

struct KeySpec {
  std::string key;
  Kind kind;
  std::string doc;
  bool hashed = true;  // run-control keys stay out of the hash
};

const std::vector<KeySpec>& schema();

class RunConfig {
 public:
  // Values are canonical strings; missing keys are filled with problem-dependent defaults.
  explicit RunConfig(std::map<std::string, std::string> values);

  const std::map<std::string, std::string>& values() const { return values_; }
  std::map<std::string, std::string> hashed_values() const;
  std::string hash() const;

  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  bool boolean(const std::string& key) const;

  std::string problem() const { return text("problem"); }
  bool is_patch() const { return problem() == "vortex-patch"; }

  PhysicalParams physical() const;
  SolverConfig solver() const;
  ContinuationConfig continuation() const;
  PatchConfig patch() const;
  StrengthFn strength() const;

  void validate() const;  // throws ConfigError

 private:
  std::map<std::string, std::string> values_;
};

// key = value lines, '#' starts a comment. Overrides are "key=value" strings applied last.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::string sha256_hex(const std::string& data);

}  // namespace vwave::cli
