#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dex/dex.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    size_t a = cur.find_first_not_of(" \t");
    size_t b = cur.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw dex::DomainError(flag + ": not a number: " + tok);
    }
  }
  if (out.empty()) throw dex::DomainError(flag + ": empty list");
  return out;
}

std::vector<long> parse_longs(const std::string& s, const std::string& flag) {
  std::vector<long> out;
  for (const auto& tok : split_list(s)) {
    try {
      size_t pos = 0;
      out.push_back(std::stol(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw dex::DomainError(flag + ": not an integer: " + tok);
    }
  }
  if (out.empty()) throw dex::DomainError(flag + ": empty list");
  return out;
}

dex::Vec broadcast_vec(const std::string& s, int M, const std::string& flag) {
  std::vector<double> xs = parse_doubles(s, flag);
  if (xs.size() != 1 && static_cast<int>(xs.size()) != M)
    throw dex::DomainError(flag + ": expected 1 or M values");
  dex::Vec v(M);
  for (int i = 0; i < M; ++i) v[i] = xs[xs.size() == 1 ? 0 : static_cast<size_t>(i)];
  return v;
}

// Square matrix from a row-major comma list; lower-triangular inputs may give
// only the M(M+1)/2 lower entries.
dex::Mat parse_matrix(const std::string& s, int M, bool lower, const std::string& flag) {
  std::vector<double> xs = parse_doubles(s, flag);
  dex::Mat out = dex::Mat::Zero(M, M);
  size_t full = static_cast<size_t>(M) * static_cast<size_t>(M);
  size_t tri = static_cast<size_t>(M) * static_cast<size_t>(M + 1) / 2;
  if (xs.size() == full) {
    size_t i = 0;
    for (int r = 0; r < M; ++r)
      for (int c = 0; c < M; ++c) out(r, c) = xs[i++];
  } else if (lower && xs.size() == tri) {
    size_t i = 0;
    for (int r = 0; r < M; ++r)
      for (int c = 0; c <= r; ++c) out(r, c) = xs[i++];
  } else {
    throw dex::DomainError(flag + ": expected " + std::to_string(full) +
                           (lower ? " or " + std::to_string(tri) : "") + " values");
  }
  return out;
}

dex::Dynamics parse_dynamics(const std::string& s) {
  if (s == "rw") return dex::Dynamics::RW;
  if (s == "attas") return dex::Dynamics::ATTAS;
  throw dex::DomainError("--dynamics: must be rw or attas, got " + s);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw dex::DomainError("cannot write: " + path);
  f << text;
}

// Fully-resolved option values for this run, written beside the outputs.
void echo_config(CLI::App* cmd, const std::string& out_dir) {
  write_text(out_dir + "/config.txt", cmd->config_to_str(true, false));
}

void ensure_out(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw dex::DomainError("cannot create output directory: " + out_dir);
}

std::string fmt_double(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

struct FitFlags {
  int m = 2;
  std::string dynamics = "rw";
  long iterations = 50000;
  int cycle_steps = 10;
  double learning_rate = 0.01;
  int restarts = 5;
  int mc_samples = 1;
  double ema = 0.99;
  bool early_stop = false;
  double early_tol = 1e-4;
  int early_window = 50;
};

void add_fit_flags(CLI::App* cmd, FitFlags& ff) {
  cmd->add_option("--m", ff.m, "Number of communities");
  cmd->add_option("--dynamics", ff.dynamics, "State dynamics: rw or attas");
  cmd->add_option("--iterations", ff.iterations, "Total gradient steps per restart");
  cmd->add_option("--cycle-steps", ff.cycle_steps, "Gradient steps between conjugate updates");
  cmd->add_option("--learning-rate", ff.learning_rate, "ADAM learning rate");
  cmd->add_option("--restarts", ff.restarts, "Random restarts");
  cmd->add_option("--mc-samples", ff.mc_samples, "Reparameterized draws per gradient step");
  cmd->add_option("--ema", ff.ema, "Smoothing factor for the ELBO trace");
  cmd->add_flag("--early-stop", ff.early_stop, "Stop when the smoothed ELBO plateaus");
  cmd->add_option("--early-tol", ff.early_tol, "Plateau improvement threshold");
  cmd->add_option("--early-window", ff.early_window, "Plateau window in conjugate cycles");
}

dex::FitOptions fit_options(const FitFlags& ff, unsigned long seed) {
  dex::FitOptions fo;
  fo.M = ff.m;
  fo.dynamics = parse_dynamics(ff.dynamics);
  fo.iterations = ff.iterations;
  fo.cycle_steps = ff.cycle_steps;
  fo.lr = ff.learning_rate;
  fo.restarts = ff.restarts;
  fo.mc_samples = ff.mc_samples;
  fo.ema = ff.ema;
  fo.early_stop = ff.early_stop;
  fo.early_tol = ff.early_tol;
  fo.early_window = ff.early_window;
  fo.seed = seed;
  return fo;
}

void write_trace(const std::vector<dex::TraceRow>& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw dex::DomainError("cannot write: " + path);
  f << "cycle,step,elbo_smoothed,elbo_sample\n" << std::setprecision(17);
  for (const auto& r : trace)
    f << r.cycle << "," << r.step << "," << r.elbo_smoothed << "," << r.elbo_sample << "\n";
}

void write_communities(const dex::TemporalNetwork& net, const dex::VariationalState& st,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw dex::DomainError("cannot write: " + path);
  f << "t,i,u,v,label\n";
  auto labels = dex::map_communities(st);
  for (int t = 1; t <= net.T(); ++t) {
    const auto& slice = net.slice(t);
    for (size_t i = 0; i < slice.edges.size(); ++i)
      f << t << "," << (i + 1) << "," << net.labels[static_cast<size_t>(slice.edges[i].first)]
        << "," << net.labels[static_cast<size_t>(slice.edges[i].second)] << ","
        << labels[static_cast<size_t>(t - 1)][i] << "\n";
  }
}

void write_scores(const std::vector<dex::VertexPair>& pairs, const dex::Vec& scores,
                  const std::vector<int>* labels, const dex::TemporalNetwork& net,
                  const std::string& path) {
  std::ofstream f(path);
  if (!f) throw dex::DomainError("cannot write: " + path);
  f << "u,v,score,label\n" << std::setprecision(17);
  for (size_t i = 0; i < pairs.size(); ++i)
    f << net.labels[static_cast<size_t>(pairs[i].first)] << ","
      << net.labels[static_cast<size_t>(pairs[i].second)] << "," << scores[static_cast<long>(i)]
      << "," << (labels ? (*labels)[i] : -1) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic edge-exchangeable temporal network model"};
  app.require_subcommand(1);

  // Shared per-subcommand values.
  struct Common {
    unsigned long seed = 0;
    std::string out = ".";
  };

  std::string config_path;
  auto add_common = [&config_path](CLI::App* cmd, Common& c) {
    // Take-last lets command-line flags override injected config entries.
    cmd->option_defaults()->always_capture_default(true)->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--config", config_path, "Flat key=value file; command-line flags override");
    cmd->add_option("--seed", c.seed, "Root seed; all randomness derives from it");
    cmd->add_option("--out", c.out, "Output directory");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Sample a temporal network and its latent record");
  Common sim_c;
  int sim_m = 2, sim_t = 3;
  std::string sim_n = "500", sim_dynamics = "rw";
  std::string sim_mu = "0", sim_mu_k = "0";
  double sim_b_scale = 1.0, sim_bk_scale = 0.1, sim_a_k = 0.9;
  std::string sim_b_chol, sim_bk_chol, sim_a_k_mat;
  double sim_mu_lambda = 4.0, sim_sigma_lambda = 0.5, sim_a_lambda = 0.5;
  bool sim_collapse = false;
  add_common(sim, sim_c);
  sim->add_option("--m", sim_m, "Number of communities");
  sim->add_option("--t", sim_t, "Number of slices");
  sim->add_option("--n", sim_n, "Edges per slice (single value or T comma values)");
  sim->add_option("--dynamics", sim_dynamics, "State dynamics: rw or attas");
  sim->add_option("--mu", sim_mu, "Vertex-state init mean (1 or M values)");
  sim->add_option("--b-scale", sim_b_scale, "Vertex-state factor B = scale * I");
  sim->add_option("--b-chol", sim_b_chol, "Full lower-triangular B (row-major list)");
  sim->add_option("--mu-k", sim_mu_k, "Community-chain init mean (1 or M values)");
  sim->add_option("--a-k", sim_a_k, "Community transition A_k = scale * I");
  sim->add_option("--a-k-mat", sim_a_k_mat, "Full A_k (row-major list)");
  sim->add_option("--bk-scale", sim_bk_scale, "Community factor B_k = scale * I");
  sim->add_option("--bk-chol", sim_bk_chol, "Full lower-triangular B_k (row-major list)");
  sim->add_option("--mu-lambda", sim_mu_lambda, "Birth log-rate mean");
  sim->add_option("--sigma-lambda", sim_sigma_lambda, "Birth log-rate noise std");
  sim->add_option("--a-lambda", sim_a_lambda, "Birth log-rate AR coefficient");
  sim->add_flag("--collapse", sim_collapse, "Also write the parallel-collapsed network");

  // sparsity
  auto* spa = app.add_subcommand("sparsity", "Single-slice sparsity experiment over sigmas");
  Common spa_c;
  std::string spa_sigma = "4,5,10";
  double spa_rate = 1e5;
  std::string spa_checkpoints = "10,18,32,56,100,178,316,562,1000,1778,3162,5623,10000";
  std::string spa_seeds = "1,2,3";
  add_common(spa, spa_c);
  spa->add_option("--sigma", spa_sigma, "Vertex-state stds (comma list)");
  spa->add_option("--rate", spa_rate, "Latent vertex pool rate");
  spa->add_option("--checkpoints", spa_checkpoints, "Edge-count checkpoints (increasing)");
  spa->add_option("--seeds", spa_seeds, "Seeds (comma list)");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Variational fit of a temporal edge list");
  Common fit_c;
  std::string fit_input;
  FitFlags fit_ff;
  add_common(fit_cmd, fit_c);
  fit_cmd->add_option("--input", fit_input, "Temporal edge list (t u v per line)")->required();
  add_fit_flags(fit_cmd, fit_ff);

  // predict
  auto* pre = app.add_subcommand("predict", "Score vertex pairs under a fitted checkpoint");
  Common pre_c;
  std::string pre_checkpoint, pre_pairs;
  int pre_samples = 500;
  add_common(pre, pre_c);
  pre->add_option("--checkpoint", pre_checkpoint, "Fitted model checkpoint")->required();
  pre->add_option("--pairs", pre_pairs, "Pair list (u,v per line); default all distinct pairs");
  pre->add_option("--samples", pre_samples, "Monte Carlo samples per score");

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "K-fold link-prediction evaluation with baselines");
  Common eva_c;
  std::string eva_input;
  int eva_folds = 3, eva_samples = 500;
  double eva_alpha = 1.0;
  FitFlags eva_ff;
  add_common(eva, eva_c);
  eva->add_option("--input", eva_input, "Temporal edge list (t u v per line)")->required();
  eva->add_option("--folds", eva_folds, "Holdout folds over final-slice edges");
  eva->add_option("--samples", eva_samples, "Monte Carlo samples per score");
  eva->add_option("--alpha", eva_alpha, "Dirichlet-multinomial smoothing");
  add_fit_flags(eva, eva_ff);

  // Config files are flat key=value; entries become --key=value tokens spliced
  // in right after the subcommand name, so later command-line flags win.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_text;
  {
    size_t sub_pos = std::string::npos;
    std::string sub_name;
    for (size_t i = 0; i < args.size(); ++i) {
      if (app.get_subcommand_no_throw(args[i]) != nullptr) {
        sub_pos = i;
        sub_name = args[i];
        break;
      }
    }
    std::string cfg_path;
    for (size_t i = 0; i < args.size(); ++i) {
      if (args[i].rfind("--config=", 0) == 0)
        cfg_path = args[i].substr(9);
      else if (args[i] == "--config" && i + 1 < args.size())
        cfg_path = args[i + 1];
    }
    if (!cfg_path.empty()) {
      std::ifstream f(cfg_path);
      if (!f) {
        std::cerr << "error: cannot open config file: " << cfg_path << "\n";
        return 1;
      }
      std::stringstream ss;
      ss << f.rdbuf();
      config_text = ss.str();
      if (sub_pos != std::string::npos) {
        CLI::App* cmd = app.get_subcommand(sub_name);
        std::vector<std::string> inj;
        std::istringstream lines(config_text);
        std::string line;
        while (std::getline(lines, line)) {
          size_t a = line.find_first_not_of(" \t\r");
          if (a == std::string::npos) continue;
          size_t b = line.find_last_not_of(" \t\r");
          line = line.substr(a, b - a + 1);
          if (line[0] == '#' || line[0] == ';') continue;
          if (line[0] == '[') {
            std::cerr << "warning: ignoring config section " << line << "\n";
            continue;
          }
          size_t eq = line.find('=');
          if (eq == std::string::npos) {
            std::cerr << "warning: ignoring config line without '=': " << line << "\n";
            continue;
          }
          auto trim = [](std::string s) {
            size_t x = s.find_first_not_of(" \t");
            size_t y = s.find_last_not_of(" \t");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
          };
          std::string key = trim(line.substr(0, eq));
          std::string val = trim(line.substr(eq + 1));
          if (val.size() >= 2 && (val.front() == '"' || val.front() == '\'') &&
              val.back() == val.front())
            val = val.substr(1, val.size() - 2);
          if (key == "config") continue;  // keeps echoed configs reusable
          if (val.empty()) continue;      // empty means "leave at default"
          if (key.empty() || cmd->get_option_no_throw("--" + key) == nullptr) {
            std::cerr << "warning: ignoring config entry '" << key << "' (not an option of "
                      << sub_name << ")\n";
            continue;
          }
          inj.push_back("--" + key + "=" + val);
        }
        args.insert(args.begin() + static_cast<long>(sub_pos) + 1, inj.begin(), inj.end());
      }
    }
  }
  auto from_config = [&config_text](const std::string& what) {
    std::istringstream toks(what);
    std::string tok, key;
    while (toks >> tok) {
      if (tok.rfind("--", 0) == 0) {
        key = tok.substr(2);
        break;
      }
    }
    while (!key.empty() && (key.back() == ':' || key.back() == ',')) key.pop_back();
    if (key.empty()) return false;
    std::istringstream lines(config_text);
    std::string line;
    while (std::getline(lines, line)) {
      size_t a = line.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      if (line.compare(a, key.size(), key) != 0) continue;
      size_t rest = line.find_first_not_of(" \t", a + key.size());
      if (rest != std::string::npos && line[rest] == '=') return true;
    }
    return false;
  };

  try {
    std::reverse(args.begin(), args.end());  // App::parse(vector) wants reversed argv
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ConversionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return from_config(e.what()) ? 1 : 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) {
      dex::ModelParams p;
      p.M = sim_m;
      p.dynamics = parse_dynamics(sim_dynamics);
      p.mu = broadcast_vec(sim_mu, sim_m, "--mu");
      p.B_chol = sim_b_chol.empty() ? dex::Mat(sim_b_scale * dex::Mat::Identity(sim_m, sim_m))
                                    : parse_matrix(sim_b_chol, sim_m, true, "--b-chol");
      p.mu_k = broadcast_vec(sim_mu_k, sim_m, "--mu-k");
      p.A_k = sim_a_k_mat.empty() ? dex::Mat(sim_a_k * dex::Mat::Identity(sim_m, sim_m))
                                  : parse_matrix(sim_a_k_mat, sim_m, false, "--a-k-mat");
      p.Bk_chol = sim_bk_chol.empty() ? dex::Mat(sim_bk_scale * dex::Mat::Identity(sim_m, sim_m))
                                      : parse_matrix(sim_bk_chol, sim_m, true, "--bk-chol");
      p.mu_lambda = sim_mu_lambda;
      p.sigma_lambda = sim_sigma_lambda;
      p.a_lambda = sim_a_lambda;
      p.validate();
      std::vector<long> n = parse_longs(sim_n, "--n");
      if (n.size() == 1) n.assign(static_cast<size_t>(sim_t), n[0]);
      if (static_cast<int>(n.size()) != sim_t)
        throw dex::DomainError("--n: expected 1 or T values");
      ensure_out(sim_c.out);
      dex::Rng rng = dex::sub_rng(sim_c.seed, 0x51AFEu);
      auto [net, rec] = dex::simulate(p, sim_t, n, rng);
      dex::save_temporal_edgelist(net, sim_c.out + "/network.txt");
      dex::save_latent_record(rec, net, sim_c.out + "/latent");
      if (sim_collapse) {
        auto [cnet, clabels] = dex::collapse_parallel(net, rec.c, sim_c.seed);
        dex::save_temporal_edgelist(cnet, sim_c.out + "/collapsed.txt");
        std::ofstream f(sim_c.out + "/collapsed_labels.csv");
        if (!f) throw dex::DomainError("cannot write: " + sim_c.out + "/collapsed_labels.csv");
        f << "t,i,label\n";
        for (int t = 1; t <= cnet.T(); ++t)
          for (size_t i = 0; i < clabels[static_cast<size_t>(t - 1)].size(); ++i)
            f << t << "," << (i + 1) << "," << clabels[static_cast<size_t>(t - 1)][i] << "\n";
      }
      echo_config(sim, sim_c.out);
    } else if (spa->parsed()) {
      std::vector<double> sigmas = parse_doubles(spa_sigma, "--sigma");
      std::vector<long> checkpoints = parse_longs(spa_checkpoints, "--checkpoints");
      std::vector<long> seed_list = parse_longs(spa_seeds, "--seeds");
      std::vector<uint64_t> seeds;
      for (long s : seed_list) {
        if (s < 0) throw dex::DomainError("--seeds: must be nonnegative");
        seeds.push_back(static_cast<uint64_t>(s));
      }
      ensure_out(spa_c.out);
      std::ofstream slopes(spa_c.out + "/slopes.csv");
      if (!slopes) throw dex::DomainError("cannot write: " + spa_c.out + "/slopes.csv");
      slopes << "sigma,slope\n" << std::setprecision(17);
      for (double sigma : sigmas) {
        dex::SparsityResult res = dex::sparsity_experiment(sigma, spa_rate, checkpoints, seeds);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        std::ostringstream name;
        name << spa_c.out << "/sparsity_sigma" << sigma << ".csv";
        dex::save_sparsity_rows(res.rows, name.str());
        double slope = dex::fitted_sparsity_slope(res.rows);
        slopes << sigma << "," << slope << "\n";
        std::cout << "sigma " << sigma << ": slope " << slope << "\n";
      }
      echo_config(spa, spa_c.out);
    } else if (fit_cmd->parsed()) {
      dex::TemporalNetwork net = dex::load_temporal_edgelist(fit_input);
      dex::FitOptions fo = fit_options(fit_ff, fit_c.seed);
      dex::FitResult fr = dex::fit(net, fo);
      ensure_out(fit_c.out);
      dex::save_checkpoint(fit_c.out + "/checkpoint.json", net, fr.state, fr.params, fit_c.seed);
      write_trace(fr.trace, fit_c.out + "/trace.csv");
      write_communities(net, fr.state, fit_c.out + "/communities.csv");
      echo_config(fit_cmd, fit_c.out);
      std::cout << "final elbo " << fmt_double(fr.final_elbo) << " (restart " << fr.best_restart
                << ")\n";
    } else if (pre->parsed()) {
      dex::Checkpoint ck = dex::load_checkpoint(pre_checkpoint);
      std::vector<dex::VertexPair> pairs;
      if (pre_pairs.empty()) {
        int n = ck.net.vertex_count();
        for (int u = 0; u < n; ++u)
          for (int v = u + 1; v < n; ++v) pairs.push_back({u, v});
      } else {
        std::ifstream f(pre_pairs);
        if (!f) throw dex::DomainError("cannot open pairs file: " + pre_pairs);
        std::string line;
        long lineno = 0;
        while (std::getline(f, line)) {
          ++lineno;
          for (auto& ch : line)
            if (ch == ',' || ch == '\t') ch = ' ';
          std::istringstream ls(line);
          std::string u, v;
          if (!(ls >> u)) continue;
          if (u == "u") continue;  // header
          if (!(ls >> v))
            throw dex::DomainError("pairs file line " + std::to_string(lineno) +
                                   ": expected two vertex labels");
          auto iu = ck.net.id_of.find(u);
          auto iv = ck.net.id_of.find(v);
          if (iu == ck.net.id_of.end() || iv == ck.net.id_of.end())
            throw dex::DomainError("pairs file line " + std::to_string(lineno) +
                                   ": unknown vertex label");
          pairs.push_back(dex::canonical_pair(iu->second, iv->second));
        }
        if (pairs.empty()) throw dex::DomainError("pairs file has no pairs: " + pre_pairs);
      }
      dex::Rng rng = dex::sub_rng(pre_c.seed, 0xE7A1u);
      dex::Vec scores = dex::predict_edge_probs(ck.state, ck.net, pairs, pre_samples, rng);
      ensure_out(pre_c.out);
      write_scores(pairs, scores, nullptr, ck.net, pre_c.out + "/scores.csv");
      echo_config(pre, pre_c.out);
    } else if (eva->parsed()) {
      dex::TemporalNetwork net = dex::load_temporal_edgelist(eva_input);
      std::vector<dex::HoldoutFold> folds = dex::holdout_split(net, eva_folds, eva_c.seed);
      ensure_out(eva_c.out);
      json report;
      report["folds"] = json::array();
      std::vector<double> model_aucs, dirmult_aucs, equiprob_aucs;
      for (size_t f = 0; f < folds.size(); ++f) {
        dex::FitOptions fo = fit_options(eva_ff, eva_c.seed + 1000003UL * (f + 1));
        dex::FitResult fr = dex::fit(folds[f].train, fo);
        dex::EvalOptions eo;
        eo.samples = eva_samples;
        eo.alpha = eva_alpha;
        eo.seed = eva_c.seed;
        dex::FoldReport rep = dex::evaluate_fold(folds[f].train, fr.state, folds[f].heldout, eo);
        write_scores(rep.pairs, rep.model_scores, &rep.labels, folds[f].train,
                     eva_c.out + "/fold" + std::to_string(f + 1) + "_scores.csv");
        auto roc_json = [](const dex::RocResult& r) {
          json arr = json::array();
          for (const auto& p : r.points) arr.push_back({p.fpr, p.tpr});
          return arr;
        };
        report["folds"].push_back({{"fold", f + 1},
                                   {"model_auc", rep.model_roc.auc},
                                   {"dirmult_auc", rep.dirmult_roc.auc},
                                   {"equiprob_auc", rep.equiprob_roc.auc},
                                   {"positives", static_cast<long>(rep.labels.size()) -
                                                     std::count(rep.labels.begin(),
                                                                rep.labels.end(), 0)},
                                   {"skipped_unknown", rep.skipped_unknown},
                                   {"model_roc", roc_json(rep.model_roc)},
                                   {"dirmult_roc", roc_json(rep.dirmult_roc)},
                                   {"equiprob_roc", roc_json(rep.equiprob_roc)}});
        model_aucs.push_back(rep.model_roc.auc);
        dirmult_aucs.push_back(rep.dirmult_roc.auc);
        equiprob_aucs.push_back(rep.equiprob_roc.auc);
      }
      auto [mm, ms] = dex::mean_and_se(model_aucs);
      auto [dm, ds] = dex::mean_and_se(dirmult_aucs);
      auto [em, es] = dex::mean_and_se(equiprob_aucs);
      report["model"] = {{"mean_auc", mm}, {"se", ms}};
      report["dirmult"] = {{"mean_auc", dm}, {"se", ds}};
      report["equiprob"] = {{"mean_auc", em}, {"se", es}};
      write_text(eva_c.out + "/report.json", report.dump(1) + "\n");
      echo_config(eva, eva_c.out);
      std::cout << "model auc " << mm << " +- " << ms << ", dirmult " << dm << ", equiprob " << em
                << "\n";
    }
  } catch (const dex::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
