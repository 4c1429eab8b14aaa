#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace vwave::cli {

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = {
      {"problem", Kind::Text, "point-vortex-periodic | point-vortex-localized | vortex-patch"},
      {"g", Kind::Number, "gravity"},
      {"alpha", Kind::Number, "surface tension coefficient (alpha^2 multiplies the curvature)"},
      {"L", Kind::Number, "periodic setting: period 2 pi L"},
      {"half_width", Kind::Number, "localized setting: truncated line [-w, w)"},
      {"n", Kind::Integer, "surface grid size (power of two)"},
      {"modes", Kind::Integer, "retained cosine modes, 0 selects n/3"},
      {"newton_tol", Kind::Number, "Newton tolerance on the projected residual"},
      {"max_iterations", Kind::Integer, "Newton iteration cap"},
      {"separation", Kind::Number, "minimum surface height over the vortex accepted by the DtN solver"},
      {"seed_epsilon", Kind::Number, "continuation seed: 0 starts from the trivial state"},
      {"ds", Kind::Number, "continuation step length"},
      {"n_steps", Kind::Integer, "accepted steps to reach (resume extends to this count)", false},
      {"max_halvings", Kind::Integer, "step halvings before the branch is truncated"},
      {"direction", Kind::Integer, "sign of d(epsilon) at the first step, +1 or -1"},
      {"blowup", Kind::Number, "alternative (i): state norm threshold"},
      {"epsilon_floor", Kind::Number, "alternative (ii): |epsilon| threshold"},
      {"nontrivial_floor", Kind::Number, "alternative (ii): amplitude that counts as nontrivial"},
      {"separation_floor", Kind::Number, "alternative (iii): threshold on 1 + eta(0)"},
      {"epsilon", Kind::Number, "patch: vortex strength"},
      {"delta", Kind::Number, "patch: size"},
      {"tau", Kind::Number, "patch: sin(2 theta) shape parameter"},
      {"strength", Kind::Text, "patch: vorticity strength function, quadratic | exponential"},
      {"n_max", Kind::Integer, "patch: retained shape modes"},
      {"patch_tol", Kind::Number, "patch: inner tolerance"},
      {"final_tol", Kind::Number, "patch: tolerance on the full residual"},
      {"boundary_samples", Kind::Integer, "patch: points on the exported boundary curve"},
      {"output_dir", Kind::Text, "directory for output files", false},
      {"timestamp", Kind::Boolean, "write a creation time into branch headers (breaks byte-identical reruns)", false},
  };
  return s;
}

namespace {

const KeySpec* find_key(const std::string& k) {
  for (const auto& s : schema()) {
    if (s.key == k) return &s;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string canonical(const KeySpec& spec, const std::string& raw) {
  const std::string v = trim(raw);
  try {
    std::size_t used = 0;
    switch (spec.kind) {
      case Kind::Number: {
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) break;
        return fmt::format("{}", d);  // shortest round-trip form
      }
      case Kind::Integer: {
        const long i = std::stol(v, &used);
        if (used != v.size()) break;
        return std::to_string(i);
      }
      case Kind::Boolean:
        if (v == "true" || v == "1" || v == "yes") return "true";
        if (v == "false" || v == "0" || v == "no") return "false";
        break;
      case Kind::Text:
        if (!v.empty()) return v;
        break;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("config: bad value '{}' for key '{}'", v, spec.key));
}

std::map<std::string, std::string> defaults(const std::string& problem) {
  const bool loc = problem == "point-vortex-localized", patch = problem == "vortex-patch";
  return {
      {"problem", problem},
      {"g", "1"},
      {"alpha", "1"},
      {"L", "1"},
      {"half_width", patch ? "60" : "100"},
      {"n", patch ? "512" : (loc ? "1024" : "64")},
      {"modes", "0"},
      {"newton_tol", "1e-10"},
      {"max_iterations", "25"},
      {"separation", "0.05"},
      {"seed_epsilon", "0"},
      {"ds", loc ? "0.005" : "0.05"},
      {"n_steps", "50"},
      {"max_halvings", "8"},
      {"direction", "1"},
      {"blowup", "100"},
      {"epsilon_floor", "1e-6"},
      {"nontrivial_floor", "1e-4"},
      {"separation_floor", "0.05"},
      {"epsilon", "0.01"},
      {"delta", "0.05"},
      {"tau", "0.1"},
      {"strength", "quadratic"},
      {"n_max", "32"},
      {"patch_tol", "1e-10"},
      {"final_tol", "1e-8"},
      {"boundary_samples", "256"},
      {"output_dir", "out"},
      {"timestamp", "false"},
  };
}

void assign(std::map<std::string, std::string>& m, const std::string& key, const std::string& value,
            const std::string& where) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError(fmt::format("config: unknown key '{}' ({})", key, where));
  m[key] = canonical(*spec, value);
}

std::pair<std::string, std::string> split_pair(const std::string& line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("config: expected key = value ({})", where));
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

RunConfig::RunConfig(std::map<std::string, std::string> values) {
  const auto p = values.find("problem");
  const std::string problem = p == values.end() ? "point-vortex-periodic" : p->second;
  for (const auto& [k, v] : defaults(problem)) values_[k] = canonical(*find_key(k), v);
  for (auto& [k, v] : values) values_[k] = v;
}

std::map<std::string, std::string> RunConfig::hashed_values() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : values_) {
    const KeySpec* s = find_key(k);
    if (s && s->hashed) out[k] = v;
  }
  return out;
}

std::string RunConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : hashed_values()) canon += k + "=" + v + "\n";
  return sha256_hex(canon);
}

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
  return it->second;
}
double RunConfig::number(const std::string& key) const { return std::stod(text(key)); }
int RunConfig::integer(const std::string& key) const { return std::stoi(text(key)); }
bool RunConfig::boolean(const std::string& key) const { return text(key) == "true"; }

PhysicalParams RunConfig::physical() const {
  PhysicalParams p;
  p.g = number("g");
  p.alpha = number("alpha");
  p.setting = problem() == "point-vortex-periodic" ? Setting::Periodic : Setting::Localized;
  p.L = number("L");
  p.half_width = number("half_width");
  return p;
}

SolverConfig RunConfig::solver() const {
  SolverConfig s;
  s.n = integer("n");
  s.modes = integer("modes");
  s.newton_tol = number("newton_tol");
  s.max_iterations = integer("max_iterations");
  s.separation = number("separation");
  return s;
}

ContinuationConfig RunConfig::continuation() const {
  ContinuationConfig c;
  c.ds = number("ds");
  c.n_steps = integer("n_steps");
  c.max_halvings = integer("max_halvings");
  c.direction = integer("direction");
  c.thresholds.blowup = number("blowup");
  c.thresholds.epsilon_floor = number("epsilon_floor");
  c.thresholds.nontrivial_floor = number("nontrivial_floor");
  c.thresholds.separation_floor = number("separation_floor");
  return c;
}

PatchConfig RunConfig::patch() const {
  PatchConfig c;
  c.physical = physical();
  c.surface = solver();
  c.n_max = integer("n_max");
  c.tol = number("patch_tol");
  c.final_tol = number("final_tol");
  return c;
}

StrengthFn RunConfig::strength() const { return StrengthFn::by_name(text("strength")); }

void RunConfig::validate() const {
  const std::string pr = problem();
  if (pr != "point-vortex-periodic" && pr != "point-vortex-localized" && pr != "vortex-patch") {
    throw ConfigError("config: unknown problem '" + pr + "'");
  }
  auto positive = [&](const char* k) {
    if (!(number(k) > 0.0)) throw ConfigError(fmt::format("config: {} must be positive", k));
  };
  for (const char* k : {"g", "alpha", "L", "half_width", "newton_tol", "separation", "patch_tol", "final_tol"}) positive(k);
  if (!power_of_two(integer("n"))) throw ConfigError("config: n must be a power of two");
  if (integer("modes") < 0 || integer("modes") >= integer("n") / 2) throw ConfigError("config: modes must lie in [0, n/2)");
  if (integer("max_iterations") < 1) throw ConfigError("config: max_iterations must be at least 1");
  if (!(number("ds") > 0.0)) throw ConfigError("config: ds must be positive");
  if (integer("n_steps") < 0) throw ConfigError("config: n_steps must be non-negative");
  if (integer("max_halvings") < 0) throw ConfigError("config: max_halvings must be non-negative");
  if (std::abs(integer("direction")) != 1) throw ConfigError("config: direction must be +1 or -1");
  for (const char* k : {"blowup", "epsilon_floor", "nontrivial_floor", "separation_floor"}) positive(k);
  if (integer("boundary_samples") < 8) throw ConfigError("config: boundary_samples must be at least 8");
  try {
    strength().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (is_patch()) {
    const PatchConfig pc = patch();
    try {
      pc.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    const double eps = number("epsilon"), delta = number("delta"), tau = number("tau");
    if (eps < 0.0 || delta < 0.0 || tau < 0.0) throw ConfigError("config: epsilon, delta, tau must be non-negative");
    if (eps > pc.max_epsilon) throw ConfigError(fmt::format("config: epsilon = {} exceeds {}", eps, pc.max_epsilon));
    if (delta > pc.max_delta) throw ConfigError(fmt::format("config: delta = {} exceeds {}", delta, pc.max_delta));
    if (tau > pc.max_tau) throw ConfigError(fmt::format("config: tau = {} exceeds {}", tau, pc.max_tau));
  }
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const std::string where = fmt::format("line {}", lineno);
    const auto [k, v] = split_pair(line, where);
    if (m.count(k)) throw ConfigError(fmt::format("config: duplicate key '{}' ({})", k, where));
    assign(m, k, v, where);
  }
  for (const auto& o : overrides) {
    const auto [k, v] = split_pair(o, "override '" + o + "'");
    assign(m, k, v, "override");
  }
  return RunConfig(std::move(m));
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return parse_config("", overrides);
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

}  // namespace vwave::cli
