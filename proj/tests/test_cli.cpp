#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dex/dex.hpp"

namespace fs = std::filesystem;

namespace {
struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

RunResult run_cli(const std::string& args) {
  std::string cmd = std::string(DEX_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  while (size_t got = fread(buf, 1, sizeof(buf), pipe)) r.output.append(buf, got);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dex_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

long count_lines(const std::string& text) {
  long n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}
}  // namespace

TEST_CASE("help exits cleanly and lists every subcommand") {
  RunResult r = run_cli("--help");
  REQUIRE(r.exit_code == 0);
  for (const char* sub : {"simulate", "sparsity", "fit", "predict", "evaluate"})
    REQUIRE(r.output.find(sub) != std::string::npos);
}

TEST_CASE("usage mistakes exit with the usage-error code") {
  REQUIRE(run_cli("frobnicate").exit_code == 2);
  REQUIRE(run_cli("simulate --no-such-flag 1").exit_code == 2);
  REQUIRE(run_cli("simulate --t notanumber").exit_code == 2);
  REQUIRE(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("runtime failures exit with the runtime-error code") {
  auto dir = fresh_dir("runtime_errors");
  REQUIRE(run_cli("simulate --config " + (dir / "missing.conf").string()).exit_code == 1);
  REQUIRE(run_cli("fit --input " + (dir / "missing.txt").string()).exit_code == 1);
  REQUIRE(run_cli("predict --checkpoint " + (dir / "missing.json").string()).exit_code == 1);
  REQUIRE(run_cli("simulate --sigma-lambda -1 --out " + dir.string()).exit_code == 1);

  std::ofstream(dir / "bad.conf") << "t=notanumber\n";
  REQUIRE(run_cli("simulate --config " + (dir / "bad.conf").string()).exit_code == 1);
}

TEST_CASE("simulation writes the advertised files and a parseable network") {
  auto dir = fresh_dir("simulate");
  RunResult r = run_cli("simulate --t 3 --n 40 --m 2 --seed 5 --collapse --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  for (const char* f : {"network.txt", "collapsed.txt", "collapsed_labels.csv", "config.txt",
                        "latent/k.csv", "latent/c.csv", "latent/birth.csv", "latent/h.csv"})
    REQUIRE(fs::exists(dir / f));

  std::ifstream in(dir / "network.txt");
  dex::TemporalNetwork net = dex::parse_temporal_edgelist(in, ' ', "network.txt");
  REQUIRE(net.T() == 3);
  long edges = 0;
  for (int t = 1; t <= 3; ++t) edges += net.slice(t).n();
  REQUIRE(edges == 120);

  std::ifstream cin_(dir / "collapsed.txt");
  dex::TemporalNetwork coll = dex::parse_temporal_edgelist(cin_, ' ', "collapsed.txt");
  REQUIRE(coll.T() == 3);
  for (int t = 1; t <= 3; ++t) REQUIRE(coll.slice(t).n() <= net.slice(t).n());

  // Label file height matches the collapsed edge count plus a header.
  long rows = count_lines(slurp(dir / "collapsed_labels.csv")) - 1;
  long coll_edges = 0;
  for (int t = 1; t <= 3; ++t) coll_edges += coll.slice(t).n();
  REQUIRE(rows == coll_edges);
}

TEST_CASE("equal seeds reproduce byte-identical simulations") {
  auto d1 = fresh_dir("repro1");
  auto d2 = fresh_dir("repro2");
  auto d3 = fresh_dir("repro3");
  std::string base = "simulate --t 2 --n 30 --m 2 --seed 9 --out ";
  REQUIRE(run_cli(base + d1.string()).exit_code == 0);
  REQUIRE(run_cli(base + d2.string()).exit_code == 0);
  REQUIRE(run_cli("simulate --t 2 --n 30 --m 2 --seed 10 --out " + d3.string()).exit_code == 0);
  REQUIRE(slurp(d1 / "network.txt") == slurp(d2 / "network.txt"));
  REQUIRE(slurp(d1 / "latent/h.csv") == slurp(d2 / "latent/h.csv"));
  REQUIRE(slurp(d1 / "network.txt") != slurp(d3 / "network.txt"));
}

TEST_CASE("config files feed flags and the command line overrides them") {
  auto dir = fresh_dir("config");
  std::ofstream(dir / "sim.conf") << "t=4\nn=25\nseed=3\n";
  REQUIRE(run_cli("simulate --config " + (dir / "sim.conf").string() + " --out " +
                  dir.string())
              .exit_code == 0);
  {
    std::ifstream in(dir / "network.txt");
    REQUIRE(dex::parse_temporal_edgelist(in, ' ', "n").T() == 4);
  }

  auto dir2 = fresh_dir("config_override");
  std::ofstream(dir2 / "sim.conf") << "t=4\nn=25\nseed=3\n";
  REQUIRE(run_cli("simulate --config " + (dir2 / "sim.conf").string() + " --t 2 --out " +
                  dir2.string())
              .exit_code == 0);
  {
    std::ifstream in(dir2 / "network.txt");
    REQUIRE(dex::parse_temporal_edgelist(in, ' ', "n").T() == 2);
  }

  // The echoed configuration reproduces the run byte for byte.
  auto dir3 = fresh_dir("config_echo");
  REQUIRE(run_cli("simulate --config " + (dir2 / "config.txt").string() + " --out " +
                  dir3.string())
              .exit_code == 0);
  REQUIRE(slurp(dir2 / "network.txt") == slurp(dir3 / "network.txt"));
}

TEST_CASE("the fit predict pipeline produces consistent artifacts") {
  auto dir = fresh_dir("pipeline");
  REQUIRE(run_cli("simulate --t 2 --n 25 --m 2 --seed 4 --out " + dir.string()).exit_code == 0);
  RunResult fitres = run_cli("fit --input " + (dir / "network.txt").string() +
                             " --m 2 --iterations 40 --cycle-steps 10 --restarts 1 --seed 1" +
                             " --out " + dir.string());
  REQUIRE(fitres.exit_code == 0);
  for (const char* f : {"checkpoint.json", "trace.csv", "communities.csv"})
    REQUIRE(fs::exists(dir / f));

  dex::Checkpoint cp = dex::load_checkpoint((dir / "checkpoint.json").string());
  REQUIRE(cp.net.T() == 2);
  REQUIRE(cp.state.M == 2);

  std::string trace = slurp(dir / "trace.csv");
  REQUIRE(trace.rfind("cycle,step,elbo_smoothed,elbo_sample\n", 0) == 0);
  REQUIRE(count_lines(trace) == 41);

  std::string comm = slurp(dir / "communities.csv");
  REQUIRE(comm.rfind("t,i,u,v,label\n", 0) == 0);
  REQUIRE(count_lines(comm) == 51);  // header plus one row per edge

  // Default prediction covers every distinct pair once.
  RunResult pred = run_cli("predict --checkpoint " + (dir / "checkpoint.json").string() +
                           " --samples 10 --seed 2 --out " + dir.string());
  REQUIRE(pred.exit_code == 0);
  std::string scores = slurp(dir / "scores.csv");
  REQUIRE(scores.rfind("u,v,score,label\n", 0) == 0);
  long v = cp.net.vertex_count();
  REQUIRE(count_lines(scores) == 1 + v * (v - 1) / 2);

  // Restricted prediction follows the pair list and rejects unknown labels.
  std::string u0 = cp.net.labels[0], u1 = cp.net.labels[1], u2 = cp.net.labels[2];
  std::ofstream(dir / "pairs.txt") << u0 << "," << u1 << "\n" << u0 << "," << u2 << "\n";
  RunResult pred2 = run_cli("predict --checkpoint " + (dir / "checkpoint.json").string() +
                            " --pairs " + (dir / "pairs.txt").string() + " --samples 5 --out " +
                            dir.string());
  REQUIRE(pred2.exit_code == 0);
  REQUIRE(count_lines(slurp(dir / "scores.csv")) == 3);

  std::ofstream(dir / "bad_pairs.txt") << u0 << ",who_is_this\n";
  REQUIRE(run_cli("predict --checkpoint " + (dir / "checkpoint.json").string() + " --pairs " +
                  (dir / "bad_pairs.txt").string() + " --out " + dir.string())
              .exit_code == 1);
}

TEST_CASE("evaluation emits a machine-readable report over all folds") {
  auto dir = fresh_dir("evaluate");
  REQUIRE(run_cli("simulate --t 2 --n 60 --m 2 --seed 8 --out " + dir.string()).exit_code == 0);
  RunResult ev = run_cli("evaluate --input " + (dir / "network.txt").string() +
                         " --folds 2 --m 2 --iterations 30 --cycle-steps 10 --restarts 1" +
                         " --samples 20 --seed 3 --out " + dir.string());
  REQUIRE(ev.exit_code == 0);
  REQUIRE(fs::exists(dir / "fold1_scores.csv"));
  REQUIRE(fs::exists(dir / "fold2_scores.csv"));

  nlohmann::json rep;
  std::ifstream(dir / "report.json") >> rep;
  REQUIRE(rep.at("folds").size() == 2);
  for (const auto& fold : rep.at("folds")) {
    for (const char* k : {"model_auc", "dirmult_auc", "equiprob_auc"}) {
      double auc = fold.at(k).get<double>();
      REQUIRE(auc >= 0.0);
      REQUIRE(auc <= 1.0);
    }
    REQUIRE(fold.at("equiprob_auc").get<double>() == 0.5);
    REQUIRE(fold.at("positives").get<long>() >= 1);
  }
  for (const char* k : {"model", "dirmult", "equiprob"}) {
    REQUIRE(rep.at(k).count("mean_auc") == 1);
    REQUIRE(rep.at(k).count("se") == 1);
  }
}

TEST_CASE("the sparsity experiment reports per-sigma growth tables and slopes") {
  auto dir = fresh_dir("sparsity");
  RunResult r = run_cli("sparsity --sigma 4 --rate 2000 --checkpoints 100,200,400 --seeds 1,2" +
                        std::string(" --seed 1 --out ") + dir.string());
  REQUIRE(r.exit_code == 0);
  std::string rows = slurp(dir / "sparsity_sigma4.csv");
  REQUIRE(rows.rfind("seed,edges,vertices\n", 0) == 0);
  REQUIRE(count_lines(rows) == 1 + 2 * 3);
  std::string slopes = slurp(dir / "slopes.csv");
  REQUIRE(slopes.rfind("sigma,slope\n", 0) == 0);
  REQUIRE(count_lines(slopes) == 2);
  REQUIRE(r.output.find("sigma 4") != std::string::npos);
}
