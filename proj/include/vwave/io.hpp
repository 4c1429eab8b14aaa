#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "vwave/point_vortex.hpp"
#include "vwave/spectral.hpp"
#include "vwave/vortex_patch.hpp"

#ifndef VWAVE_VERSION
#define VWAVE_VERSION "0.0.0"
#endif

namespace vwave::io {

inline constexpr const char* version = VWAVE_VERSION;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits round-trip every double.
inline std::string num(double v) {
  if (!std::isfinite(v)) throw FormatError("io: refusing to write a non-finite number");
  return fmt::format("{:.17g}", v);
}

inline std::string num_array(const Vec& v) {
  std::string s = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += num(v[i]);
  }
  return s + "]";
}

inline std::string str(const std::string& v) { return nlohmann::json(v).dump(); }

// Ordered key/value pairs; values are already-encoded JSON text.
class JsonObject {
 public:
  JsonObject& add(const std::string& key, const std::string& encoded) {
    items_.emplace_back(key, encoded);
    return *this;
  }
  JsonObject& add(const std::string& key, double v) { return add(key, num(v)); }
  JsonObject& add(const std::string& key, int v) { return add(key, std::to_string(v)); }
  JsonObject& add_string(const std::string& key, const std::string& v) { return add(key, str(v)); }
  std::string dump() const {
    std::string s = "{";
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (i) s += ',';
      s += str(items_[i].first) + ":" + items_[i].second;
    }
    return s + "}";
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

inline std::string string_map(const std::map<std::string, std::string>& m) {
  JsonObject o;
  for (const auto& [k, v] : m) o.add_string(k, v);
  return o.dump();
}

inline Vec to_vec(const nlohmann::json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

// {grid: {L | half_width, n}, values: [...]}
inline std::string field_json(const PeriodicGrid& g, const Vec& values) {
  return JsonObject().add("grid", JsonObject().add("L", g.L()).add("n", g.n()).dump()).add("values", num_array(values)).dump();
}
inline std::string field_json(const LineGrid& g, const Vec& values) {
  return JsonObject()
      .add("grid", JsonObject().add("half_width", g.half_width()).add("n", g.n()).dump())
      .add("values", num_array(values))
      .dump();
}

// ---------------------------------------------------------------------------
// Branch files: a header line, then one accepted point per line.

struct BranchHeader {
  std::string config_hash;
  std::map<std::string, std::string> config;  // echo of the hashed keys
  std::string setting;
  double L = 0.0;  // period parameter, or half width when localized
  int n = 0;
  BranchPoint seed;
  std::string created;  // optional; empty keeps reruns byte-identical
};

inline std::string point_json(const BranchPoint& p) {
  std::string flags = "[";
  const auto names = p.flags.names();
  for (std::size_t i = 0; i < names.size(); ++i) flags += (i ? "," : "") + str(names[i]);
  flags += "]";
  return JsonObject()
      .add("epsilon", p.state.epsilon)
      .add("c", p.state.c)
      .add("eta_values", num_array(p.state.eta))
      .add("psi_values", num_array(p.state.psi))
      .add("residual_norm", p.residual_norm)
      .add("flags", flags)
      .add("arclength", p.arclength)
      .add("ds", p.ds)
      .add("newton_iterations", p.newton_iterations)
      .add("jacobian_condition", p.jacobian_condition)
      .dump();
}

inline BranchPoint point_from_json(const nlohmann::json& j) {
  BranchPoint p;
  p.state.epsilon = j.at("epsilon").get<double>();
  p.state.c = j.at("c").get<double>();
  p.state.eta = to_vec(j.at("eta_values"));
  p.state.psi = to_vec(j.at("psi_values"));
  p.residual_norm = j.at("residual_norm").get<double>();
  for (const auto& f : j.at("flags")) {
    const std::string s = f.get<std::string>();
    if (s == "unbounded") p.flags.unbounded = true;
    else if (s == "irrotational") p.flags.irrotational = true;
    else if (s == "separation") p.flags.separation = true;
    else throw FormatError("branch file: unknown flag '" + s + "'");
  }
  p.arclength = j.at("arclength").get<double>();
  p.ds = j.at("ds").get<double>();
  p.newton_iterations = j.at("newton_iterations").get<int>();
  p.jacobian_condition = j.at("jacobian_condition").get<double>();
  return p;
}

inline std::string header_json(const BranchHeader& h) {
  JsonObject o;
  o.add_string("type", "vwave-branch").add_string("version", version).add_string("config_hash", h.config_hash);
  if (!h.created.empty()) o.add_string("created", h.created);
  return o.add("config", string_map(h.config))
      .add_string("setting", h.setting)
      .add(h.setting == "periodic" ? "L" : "half_width", h.L)
      .add("n", h.n)
      .add("seed", point_json(h.seed))
      .dump();
}

inline void write_branch(const std::string& path, const BranchHeader& h, const Branch& b) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << header_json(h) << '\n';
  for (std::size_t i = 1; i < b.points.size(); ++i) out << point_json(b.points[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Returns the header and the branch with the seed as point 0.
inline std::pair<BranchHeader, Branch> read_branch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("branch file is empty: " + path);
  BranchHeader h;
  Branch b;
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") != "vwave-branch") throw FormatError("not a branch file: " + path);
    h.config_hash = j.at("config_hash").get<std::string>();
    if (j.contains("created")) h.created = j.at("created").get<std::string>();
    for (const auto& [k, v] : j.at("config").items()) h.config[k] = v.get<std::string>();
    h.setting = j.at("setting").get<std::string>();
    h.L = j.contains("L") ? j.at("L").get<double>() : j.at("half_width").get<double>();
    h.n = j.at("n").get<int>();
    h.seed = point_from_json(j.at("seed"));
    b.points.push_back(h.seed);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      b.points.push_back(point_from_json(nlohmann::json::parse(line)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("branch file {}: {}", path, e.what()));
  }
  return {h, b};
}

// ---------------------------------------------------------------------------
// CSV exports

inline std::string csv_preamble(const std::string& hash) {
  return fmt::format("# vwave {} config_hash {}\n", version, hash);
}

inline void write_profile_csv(const std::string& path, const Vec& x, const PointVortexState& s, const std::string& hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << csv_preamble(hash) << fmt::format("# epsilon {} c {}\n", num(s.epsilon), num(s.c)) << "x1,eta,psi\n";
  for (int j = 0; j < x.size(); ++j) out << num(x[j]) << ',' << num(s.eta[j]) << ',' << num(s.psi[j]) << '\n';
}

inline void write_boundary_csv(const std::string& path, const PatchState& s, int M, const std::string& hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << csv_preamble(hash) << "theta,x1,x2\n";
  const auto pts = s.boundary_curve(M);
  for (int j = 0; j < M; ++j) out << num(2.0 * pi * j / M) << ',' << num(pts[j].x1) << ',' << num(pts[j].x2) << '\n';
}

// r, F*, q_1..q_n on the radial nodes, ascending in r.
inline void write_radial_csv(const std::string& path, const RadialProfile& p, const StrengthFn& g, int n_modes,
                             const std::string& hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << csv_preamble(hash) << fmt::format("# strength {} a {}\n", g.name, num(p.a)) << "r,F";
  std::vector<Vec> q;
  for (int n = 1; n <= n_modes; ++n) {
    out << ",q" << n;
    q.push_back(solve_resolvent(p, g, n).q);
  }
  out << '\n';
  for (int i = static_cast<int>(p.r.size()) - 1; i >= 0; --i) {
    out << num(p.r[i]) << ',' << num(p.F[i]);
    for (const Vec& v : q) out << ',' << num(v[i]);
    out << '\n';
  }
}

inline std::string patch_json(const PatchState& s, const std::string& strength, int M, const std::string& hash,
                              const std::map<std::string, std::string>& config) {
  std::string curve = "[";
  const auto pts = s.boundary_curve(M);
  for (int j = 0; j < M; ++j) curve += (j ? ",[" : "[") + num(pts[j].x1) + "," + num(pts[j].x2) + "]";
  curve += "]";
  return JsonObject()
      .add_string("type", "vwave-patch")
      .add_string("version", version)
      .add_string("config_hash", hash)
      .add("config", string_map(config))
      .add_string("strength", strength)
      .add("epsilon", s.epsilon)
      .add("delta", s.delta)
      .add("tau", s.tau)
      .add("c", s.c())
      .add("c_over_epsilon", s.c_tilde)
      .add("beta_coeffs", num_array(s.beta.beta))
      .add("eta_values", num_array(s.eta()))
      .add("psi_values", num_array(s.psi()))
      .add("x_values", num_array(s.nodes))
      .add("a", s.a)
      .add("mu", s.mu)
      .add("residual", s.residual)
      .add("boundary_curve", curve)
      .dump();
}

}  // namespace vwave::io
