#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "config.hpp"
#include "vwave/io.hpp"

using namespace vwave;
using namespace vwave::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vwave_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

int run_binary(const std::string& args) {
  const int st = std::system((std::string(VWAVE_BINARY) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Config, ParsesCommentsAndFillsDefaults) {
  const RunConfig c = parse_config("# header\nproblem = point-vortex-localized  # trailing\n\n  g=2\n");
  EXPECT_EQ(c.problem(), "point-vortex-localized");
  EXPECT_EQ(c.number("g"), 2.0);
  EXPECT_EQ(c.integer("n"), 1024);
  EXPECT_EQ(c.physical().setting, Setting::Localized);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("g = 1\ng = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("g = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("n = 64.5\n"), ConfigError);
  EXPECT_THROW(parse_config("just text\n"), ConfigError);
  EXPECT_THROW(parse_config("ds = 0\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("n = 96\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("problem = wave\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("problem = vortex-patch\ntau = 0.3\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("problem = vortex-patch\nstrength = cubic\n").validate(), ConfigError);
}

TEST(Config, HashIsCanonical) {
  const RunConfig a = parse_config("L = 1\nalpha = 1.0\n");
  const RunConfig b = parse_config("alpha=1\nL=1.000\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), parse_config("").hash());
  EXPECT_EQ(a.hash().size(), 64u);
  // run-control keys stay out of the hash
  EXPECT_EQ(a.hash(), parse_config("", {"output_dir=elsewhere", "n_steps=3", "timestamp=true"}).hash());
  EXPECT_NE(a.hash(), parse_config("", {"L=2"}).hash());
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Io, BranchRoundTripIsExact) {
  PhysicalParams p;
  const PointVortexModel m(p, SolverConfig{});
  ContinuationConfig cc;
  cc.n_steps = 3;
  const Branch b = start_branch(m, m.trivial_state(), cc);
  io::BranchHeader h;
  h.config_hash = "abc";
  h.setting = "periodic";
  h.L = 1.0;
  h.n = 64;
  h.seed = b.points.front();
  const fs::path dir = scratch("io");
  fs::create_directories(dir);
  io::write_branch((dir / "b.ndjson").string(), h, b);
  const auto [h2, b2] = io::read_branch((dir / "b.ndjson").string());
  EXPECT_EQ(h2.config_hash, "abc");
  ASSERT_EQ(b2.points.size(), b.points.size());
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    EXPECT_EQ(b2.points[i].state.epsilon, b.points[i].state.epsilon);
    EXPECT_EQ(b2.points[i].state.c, b.points[i].state.c);
    EXPECT_EQ((b2.points[i].state.eta - b.points[i].state.eta).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((b2.points[i].state.psi - b.points[i].state.psi).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(b2.points[i].arclength, b.points[i].arclength);
    EXPECT_EQ(b2.points[i].ds, b.points[i].ds);
  }
  EXPECT_THROW(io::num(std::nan("")), io::FormatError);
}

TEST(Continue, TwentyStepsGiveTwentyOneLines) {
  const fs::path dir = scratch("cont");
  const RunConfig c = parse_config("L = 1\ng = 1\nalpha = 1\nn_steps = 20\n", {"output_dir=" + dir.string()});
  std::ostringstream out, err;
  EXPECT_EQ(cmd_continue(c, "", out, err), kOk);
  EXPECT_EQ(line_count(dir / "branch.ndjson"), 21);
  const std::string head = slurp(dir / "branch.ndjson").substr(0, 300);
  EXPECT_NE(head.find(c.hash()), std::string::npos);
  EXPECT_NE(head.find("\"version\":\"" + std::string(io::version) + "\""), std::string::npos);
  EXPECT_EQ(head.find("created"), std::string::npos);
  EXPECT_NE(slurp(dir / "profile.csv").find(c.hash()), std::string::npos);
  EXPECT_NE(out.str().find("1+eta(0)"), std::string::npos);
}

TEST(Continue, ResumeIsBitIdentical) {
  const fs::path full = scratch("full"), part = scratch("part");
  const std::string cfg = "n_steps = 12\nds = 0.1\n";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_continue(parse_config(cfg, {"output_dir=" + full.string()}), "", out, err), kOk);
  ASSERT_EQ(cmd_continue(parse_config(cfg, {"output_dir=" + part.string(), "n_steps=5"}), "", out, err), kOk);
  EXPECT_EQ(line_count(part / "branch.ndjson"), 6);
  ASSERT_EQ(cmd_continue(parse_config(cfg, {"output_dir=" + part.string()}), (part / "branch.ndjson").string(), out, err),
            kOk);
  EXPECT_EQ(slurp(full / "branch.ndjson"), slurp(part / "branch.ndjson"));
  EXPECT_EQ(slurp(full / "profile.csv"), slurp(part / "profile.csv"));
  // a different configuration refuses the checkpoint
  EXPECT_THROW(cmd_continue(parse_config(cfg, {"output_dir=" + part.string(), "L=2"}),
                            (part / "branch.ndjson").string(), out, err),
               ConfigError);
}

TEST(Continue, FlaggedAlternativeIsReported) {
  const fs::path dir = scratch("flag");
  std::ostringstream out, err;
  const RunConfig c = parse_config("ds = 0.25\nblowup = 0.5\n", {"output_dir=" + dir.string()});
  EXPECT_EQ(cmd_continue(c, "", out, err), kOk);
  EXPECT_NE(out.str().find("unbounded"), std::string::npos);
  EXPECT_THROW(cmd_continue(parse_config("problem = vortex-patch\n"), "", out, err), ConfigError);
}

TEST(Patch, DefaultsAndFixtureComparison) {
  std::ostringstream out, err;
  std::vector<std::vector<double>> curves;
  for (const char* g : {"quadratic", "exponential"}) {
    const fs::path dir = scratch(std::string("patch_") + g);
    const RunConfig c = parse_config("problem = vortex-patch\n", {"output_dir=" + dir.string(), std::string("strength=") + g});
    c.validate();
    ASSERT_EQ(cmd_patch(c, out, err), kOk);
    const auto j = nlohmann::json::parse(slurp(dir / "patch.json"));
    EXPECT_EQ(j.at("config_hash"), c.hash());
    EXPECT_EQ(j.at("version"), io::version);
    const double ratio = j.at("c").get<double>() / j.at("epsilon").get<double>();
    EXPECT_NEAR(ratio, -1.0 / (4 * pi), 0.1 / (4 * pi));
    EXPECT_EQ(j.at("boundary_curve").size(), 256u);
    std::vector<double> xy;
    for (const auto& p : j.at("boundary_curve")) xy.insert(xy.end(), {p[0].get<double>(), p[1].get<double>()});
    curves.push_back(xy);
    EXPECT_NE(slurp(dir / "boundary.csv").find(c.hash()), std::string::npos);
  }
  // the strength function only enters at O(delta^2 (delta + eps)) in the boundary
  double d = 0.0;
  for (std::size_t i = 0; i < curves[0].size(); ++i) d = std::max(d, std::abs(curves[0][i] - curves[1][i]));
  const double eps = 0.01, delta = 0.05;
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, delta * delta * (delta + eps));
}

TEST(Verify, SuitesAndExitCodes) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify("bogus", out, err), kUsage);
  EXPECT_EQ(cmd_verify("dtn", out, err), kOk);
  EXPECT_NE(out.str().find("[PASS]  8"), std::string::npos);
  out.str("");
  EXPECT_EQ(cmd_verify("radial", out, err), kOk);
  EXPECT_NE(out.str().find("kappa_1..20"), std::string::npos);
}

TEST(Binary, ExitCodes) {
  EXPECT_EQ(run_binary("--version"), 0);
  EXPECT_EQ(run_binary(""), 2);
  EXPECT_EQ(run_binary("verify bogus"), 2);
  EXPECT_EQ(run_binary("verify green"), 0);
  EXPECT_EQ(run_binary("continue -s ds=0"), 2);
  EXPECT_EQ(run_binary("patch -s problem=vortex-patch -s tau=0.3"), 2);
  EXPECT_EQ(run_binary("continue -s bogus=1"), 2);
  EXPECT_EQ(run_binary("config /nonexistent/file.cfg"), 2);
  // one Newton iteration cannot hold a large step; truncation is a solve failure
  const fs::path dir = scratch("bin");
  EXPECT_EQ(run_binary("continue -s max_iterations=1 -s ds=2 -s max_halvings=0 -s output_dir=" + dir.string()), 1);
}
