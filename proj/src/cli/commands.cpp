#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "checks.hpp"
#include "vwave/io.hpp"

namespace vwave::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir(cfg.text("output_dir"));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  return dir;
}

void print_table(std::ostream& out, const PointVortexModel& m, const Branch& b) {
  fmt::print(out, "{:>5} {:>14} {:>14} {:>12} {:>12}  {}\n", "step", "epsilon", "c", "|eta|_inf", "1+eta(0)", "flags");
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    const PointVortexState& s = b.points[i].state;
    const auto names = b.points[i].flags.names();
    fmt::print(out, "{:>5} {:>14.8g} {:>14.8g} {:>12.5e} {:>12.8f}  {}\n", i, s.epsilon, s.c, s.eta.cwiseAbs().maxCoeff(),
               1.0 + s.eta[m.origin_index()], names.empty() ? "-" : fmt::format("{}", fmt::join(names, ",")));
  }
}

}  // namespace

int cmd_continue(const RunConfig& cfg, const std::string& resume, std::ostream& out, std::ostream& err) {
  if (cfg.is_patch()) throw ConfigError("continue: problem must be point-vortex-periodic or point-vortex-localized");
  const PointVortexModel m(cfg.physical(), cfg.solver());
  ContinuationConfig cc = cfg.continuation();

  io::BranchHeader h;
  h.config_hash = cfg.hash();
  h.config = cfg.hashed_values();
  h.setting = to_string(m.params().setting);
  h.L = m.periodic() ? m.params().L : m.params().half_width;
  h.n = m.config().n;
  if (cfg.boolean("timestamp")) h.created = utc_now();

  Branch branch;
  if (!resume.empty()) {
    auto [old, b] = io::read_branch(resume);
    if (old.config_hash != h.config_hash) {
      throw ConfigError(fmt::format("resume: {} was written with config hash {}, current config hashes to {}", resume,
                                    old.config_hash, h.config_hash));
    }
    branch = std::move(b);
    h.seed = old.seed;
    if (!old.created.empty() && h.created.empty()) h.created = old.created;
    const int done = static_cast<int>(branch.points.size()) - 1;
    cc.n_steps = std::max(0, cc.n_steps - done);
    fmt::print(out, "resuming from {} accepted steps\n", done);
    if (cc.n_steps > 0) continue_branch(m, branch, cc);
  } else {
    PointVortexState seed = m.trivial_state();
    if (cfg.number("seed_epsilon") != 0.0) {
      seed = newton_solve(m, m.asymptotic_predictor(cfg.number("seed_epsilon"))).state;
    }
    branch = start_branch(m, seed, cc);
    h.seed = branch.points.front();
  }

  const fs::path dir = prepare_output(cfg);
  io::write_branch((dir / "branch.ndjson").string(), h, branch);
  io::write_profile_csv((dir / "profile.csv").string(), m.nodes(), branch.points.back().state, h.config_hash);
  print_table(out, m, branch);
  fmt::print(out, "wrote {} ({} lines), {}\n", (dir / "branch.ndjson").string(), branch.points.size(),
             (dir / "profile.csv").string());

  if (branch.termination.empty()) return kOk;
  if (branch.points.back().flags.any()) {
    fmt::print(out, "branch stopped: {}\n", branch.termination);
    return kOk;
  }
  fmt::print(err, "error: branch truncated: {}\n", branch.termination);
  return kFailure;
}

int cmd_patch(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (!cfg.is_patch()) throw ConfigError("patch: problem must be vortex-patch");
  const StrengthFn g = cfg.strength();
  const double eps = cfg.number("epsilon"), delta = cfg.number("delta"), tau = cfg.number("tau");
  const PatchState s = solve_patch(eps, delta, tau, g, cfg.patch());

  const fs::path dir = prepare_output(cfg);
  const int M = cfg.integer("boundary_samples");
  {
    std::ofstream f(dir / "patch.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write patch.json");
    f << io::patch_json(s, g.name, M, cfg.hash(), cfg.hashed_values()) << '\n';
  }
  io::write_boundary_csv((dir / "boundary.csv").string(), s, M, cfg.hash());

  fmt::print(out, "strength {}  epsilon {}  delta {}  tau {}\n", g.name, eps, delta, tau);
  fmt::print(out, "c         = {:.12e}\n", s.c());
  fmt::print(out, "c/eps     = {:.12f}   (-1/4pi = {:.12f})\n", s.c_tilde, -1.0 / (4.0 * pi));
  fmt::print(out, "residual  = {:.3e}   outer {}  inner {}\n", s.residual, s.outer_iterations, s.inner_iterations);
  fmt::print(out, "wrote {}, {}\n", (dir / "patch.json").string(), (dir / "boundary.csv").string());
  return kOk;
}

int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err) {
  if (!verify::is_suite(suite)) {
    std::string names;
    for (const auto& n : verify::suite_names()) names += (names.empty() ? "" : "|") + n;
    fmt::print(err, "error: unknown suite '{}' (expected {})\n", suite, names);
    return kUsage;
  }
  int failed = 0;
  const auto ids = verify::suite_criteria(suite);
  for (int id : ids) {
    const verify::CheckResult r = verify::run_criterion(id);
    fmt::print(out, "[{}] {:2d} {} ({:.2f} s)\n", r.pass ? "PASS" : "FAIL", r.id, r.title, r.seconds);
    for (const auto& line : r.details) fmt::print(out, "       {}\n", line);
    out.flush();
    if (!r.pass) ++failed;
  }
  fmt::print(out, "{}/{} passed\n", ids.size() - failed, ids.size());
  return failed ? kFailure : kOk;
}

}  // namespace vwave::cli
