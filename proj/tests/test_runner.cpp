#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slfv/config.hpp"
#include "slfv/errors.hpp"
#include "slfv/runner.hpp"

using namespace slfv;
namespace fs = std::filesystem;

namespace {

const char* kPairConfig = R"(kind = "pair-time"
seed = 21
replicates = 30
L = [12, 16]

[small]
radius = 1.0
impact = 1.0
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slfv-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.messages();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& msgs, const std::string& needle) {
  for (const auto& m : msgs) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string plot(const fs::path& dir, const std::string& view) {
  std::ostringstream out;
  emit_plotdata(dir, view, out);
  return out.str();
}

}  // namespace

TEST(ConfigGrammar, ValuesAndComments) {
  const auto tree = parse_config_tree(
      "a = 1.5 # trailing\nb = \"x # not a comment\"\nc = [1, [2, 3], true]\n[sec]\nd = inf\n");
  EXPECT_EQ(std::get<double>(tree.at("").at("a").data), 1.5);
  EXPECT_EQ(std::get<std::string>(tree.at("").at("b").data), "x # not a comment");
  const auto& list = std::get<std::vector<ConfigValue>>(tree.at("").at("c").data);
  ASSERT_EQ(list.size(), 3u);
  EXPECT_TRUE(std::get<bool>(list[2].data));
  EXPECT_TRUE(std::isinf(std::get<double>(tree.at("sec").at("d").data)));
  EXPECT_EQ(tree.at("sec").at("d").line, 5);
}

TEST(ConfigGrammar, ParseErrorsCarryLineNumbersAndAreAllReported) {
  try {
    parse_config_tree("ok = 1\nbroken\nx = [1, 2\n[bad\ny = 1\ny = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const auto& m = e.messages();
    ASSERT_EQ(m.size(), 4u);
    EXPECT_EQ(m[0].rfind("line 2:", 0), 0u);
    EXPECT_EQ(m[1].rfind("line 3:", 0), 0u);
    EXPECT_EQ(m[2].rfind("line 4:", 0), 0u);
    EXPECT_EQ(m[3].rfind("line 6:", 0), 0u);
  }
}

TEST(Config, MinimalSmallOnlyConfigIsSmallGathering) {
  const auto cfg = parse_config(kPairConfig);
  EXPECT_EQ(cfg.kind, ExperimentKind::pair_time);
  ASSERT_TRUE(cfg.classification);
  EXPECT_EQ(cfg.classification->kind, TimescaleCase::small_gathering);
  EXPECT_EQ(cfg.ls, (std::vector<double>{12, 16}));
  EXPECT_EQ(cfg.seed, 21u);
}

TEST(Config, ImpactAboveOneRejected) {
  const auto errs = errors_of(std::string(kPairConfig) +
                              "[large]\nradius = 1.0\nimpact = 1.5\n[regime]\npsi = [1, 0.5]\nrho = [1, 1]\n");
  EXPECT_TRUE(any_contains(errs, "[large] impact")) << errs.size();
  const auto table = errors_of(std::string(kPairConfig) +
                               "[large]\nradius = 1.0\nimpact_table = [[0.5, 1], [1.2, 1]]\n"
                               "[regime]\npsi = [1, 0.5]\nrho = [1, 1]\n");
  EXPECT_TRUE(any_contains(table, "impact_table"));
}

TEST(Config, AlphaOneNeedsSmallLargeRadius) {
  const auto errs = errors_of(std::string(kPairConfig) +
                              "[large]\nradius = 0.8\nimpact = 0.5\n[regime]\npsi = [1, 1]\nrho = [1, 2, 2]\n");
  EXPECT_TRUE(any_contains(errs, "R^B <= 1/sqrt(2)"));
  EXPECT_TRUE(errors_of(std::string(kPairConfig) +
                        "[large]\nradius = 0.5\nimpact = 0.5\n[regime]\npsi = [1, 1]\nrho = [1, 2, 2]\n")
                  .empty());
}

TEST(Config, CollectsEveryValidationError) {
  const auto errs = errors_of("kind = \"pair-time\"\nL = 2\nbogus = 3\nreplicates = -1\n[small]\nradius = 1\n");
  EXPECT_TRUE(any_contains(errs, "bogus: unknown key"));
  EXPECT_TRUE(any_contains(errs, "replicates"));
  EXPECT_TRUE(any_contains(errs, "exceed e"));
  EXPECT_TRUE(any_contains(errs, "impact"));
  EXPECT_GE(errs.size(), 4u);
}

TEST(Config, UnknownKindAndUncoveredRegime) {
  EXPECT_TRUE(any_contains(errors_of("kind = \"nope\"\n"), "unknown experiment kind"));
  const auto errs = errors_of(std::string(kPairConfig) +
                              "[large]\nradius = 1\nimpact = 1\n[regime]\npsi = [1, 0.5]\nrho = [1, 1, 1]\n");
  EXPECT_TRUE(any_contains(errs, "regime:"));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Runner, ZeroReplicatesWritesManifestOnly) {
  auto cfg = parse_config(kPairConfig);
  cfg.replicates = 0;
  const auto dir = scratch("zero");
  RunOptions opt;
  opt.out = dir;
  EXPECT_TRUE(run_experiment(cfg, opt).complete);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path().filename().string());
  EXPECT_EQ(files, std::vector<std::string>{"manifest.json"});
  EXPECT_EQ(plot(dir, "survival"), "L,t_normalized,empirical_survival,exp_minus_t\n");
}

TEST(Runner, DeterministicAcrossRunsAndThreads) {
  const auto cfg = parse_config(kPairConfig);
  const auto a = scratch("det-a"), b = scratch("det-b");
  RunOptions opt;
  opt.out = a;
  run_experiment(cfg, opt);
  opt.out = b;
  opt.threads = 3;
  opt.chunk = 7;
  run_experiment(cfg, opt);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Runner, SeedOverrideChangesOutput) {
  const auto cfg = parse_config(kPairConfig);
  const auto a = scratch("seed-a"), b = scratch("seed-b");
  RunOptions opt;
  opt.out = a;
  run_experiment(cfg, opt);
  opt.out = b;
  opt.seed = 22;
  run_experiment(cfg, opt);
  EXPECT_NE(slurp(a / "results.csv"), slurp(b / "results.csv"));
}

TEST(Runner, ResumeMatchesUninterruptedRun) {
  const auto cfg = parse_config(kPairConfig);
  const auto full = scratch("resume-full"), part = scratch("resume-part");
  RunOptions opt;
  opt.out = full;
  run_experiment(cfg, opt);

  opt.out = part;
  opt.chunk = 8;
  opt.stop_after = 3;
  const auto stopped = run_experiment(cfg, opt);
  EXPECT_FALSE(stopped.complete);
  EXPECT_EQ(stopped.units_done, 24u);
  EXPECT_TRUE(fs::exists(part / "progress.json"));
  EXPECT_FALSE(fs::exists(part / "manifest.json"));
  // Simulate a torn write after the last flushed chunk.
  { std::ofstream(part / "results.csv", std::ios::app) << "12,99,garbage"; }

  opt.stop_after.reset();
  opt.resume = true;
  opt.chunk = 5;
  EXPECT_TRUE(run_experiment(cfg, opt).complete);
  EXPECT_EQ(slurp(full / "results.csv"), slurp(part / "results.csv"));
  EXPECT_EQ(slurp(full / "summary.json"), slurp(part / "summary.json"));
  EXPECT_FALSE(fs::exists(part / "progress.json"));
}

TEST(Runner, ResumeRefusesForeignProgress) {
  const auto cfg = parse_config(kPairConfig);
  const auto dir = scratch("foreign");
  RunOptions opt;
  opt.out = dir;
  opt.chunk = 8;
  opt.stop_after = 1;
  run_experiment(cfg, opt);
  opt.stop_after.reset();
  opt.resume = true;
  opt.seed = 1234;
  EXPECT_THROW(run_experiment(cfg, opt), std::runtime_error);
}

TEST(Runner, ManifestHashesEveryOutput) {
  const auto cfg = parse_config(
      "kind = \"genealogy\"\nseed = 3\nreplicates = 3\nL = 10\n[small]\nradius = 1\nimpact = 1\n"
      "[sample]\nn = 3\nplacement = \"uniform\"\n");
  const auto dir = scratch("manifest");
  RunOptions opt;
  opt.out = dir;
  run_experiment(cfg, opt);
  std::ifstream in(dir / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m.at("config_sha256"), sha256_hex(cfg.text));
  EXPECT_EQ(m.at("seed"), 3);
  EXPECT_EQ(m.at("version"), std::string(kVersion));
  EXPECT_TRUE(m.contains("wall_time_seconds"));
  std::size_t logs = 0;
  for (const auto& o : m.at("outputs")) {
    const auto path = o.at("path").get<std::string>();
    EXPECT_EQ(o.at("sha256"), sha256_file(dir / path)) << path;
    logs += path.rfind("events/", 0) == 0;
  }
  EXPECT_EQ(logs, 3u);
  EXPECT_EQ(m.at("outputs").size(), 5u);
}

TEST(Plotdata, ViewsAndKindChecks) {
  const auto cfg = parse_config(kPairConfig);
  const auto dir = scratch("plot");
  RunOptions opt;
  opt.out = dir;
  run_experiment(cfg, opt);
  const auto ks = plot(dir, "ks-trend");
  EXPECT_EQ(ks.substr(0, ks.find('\n')), "L,ks_stat,n_replicates");
  EXPECT_NE(ks.find("\n12,"), std::string::npos);
  EXPECT_NE(ks.find(",30\n"), std::string::npos);
  const auto surv = plot(dir, "survival");
  EXPECT_EQ(std::count(surv.begin(), surv.end(), '\n'), 61);
  EXPECT_THROW(plot(dir, "merger-hist"), std::invalid_argument);
  EXPECT_THROW(plot(dir, "block-count"), std::invalid_argument);
  EXPECT_THROW(plot(dir, "nonsense"), std::invalid_argument);
  const auto empty = scratch("plot-empty");
  fs::create_directories(empty);
  EXPECT_EQ(plot(empty, "ks-trend"), "L,ks_stat,n_replicates\n");
}

TEST(Plotdata, MergerHistogramAndBlockCount) {
  const auto fm = parse_config(
      "kind = \"first-merger\"\nseed = 1\nreplicates = 200\nL = 16\nc = 1\nrho = 1000\n"
      "[large]\nradius = 0.25\nimpact = 0.5\n[sample]\nn = 4\n");
  const auto dir = scratch("fm");
  RunOptions opt;
  opt.out = dir;
  run_experiment(fm, opt);
  const auto hist = plot(dir, "merger-hist");
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "k,observed,expected");
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 4);

  const auto bc = parse_config(
      "kind = \"block-count\"\nseed = 1\nreplicates = 20\nL = 12\ntimes = [0.1, 0.5]\n"
      "[small]\nradius = 1\nimpact = 1\n[sample]\nn = 3\n");
  const auto dir2 = scratch("bc");
  opt.out = dir2;
  run_experiment(bc, opt);
  const auto text = plot(dir2, "block-count");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 3);
}
