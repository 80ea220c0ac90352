#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mwc/experiment.hpp"
#include "mwc/properties.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitProperty = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON experiment config");
  cmd->add_option("--seed", c.seed, "override rng_seed");
  cmd->add_option("--out", c.out, "output root directory");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

mwc::ExperimentConfig resolve(const Common& c) {
  mwc::ExperimentConfig cfg = c.config.empty() ? mwc::ExperimentConfig{} : mwc::load_config(c.config);
  if (c.seed) cfg.rng_seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void finish_run(const fs::path& dir, const mwc::ExperimentConfig& cfg, const std::string& command, unsigned threads,
                const std::vector<std::string>& files) {
  {
    auto os = open_out(dir / "run_meta.json");
    os << mwc::run_meta(cfg, command, threads, files).dump(2) << '\n';
  }
  std::cout << dir.string() << '\n';
}

int cmd_estimate(const Common& c, const std::string& edges, const std::string& actions) {
  auto cfg = resolve(c);
  const std::string edge_path = edges.empty() ? cfg.network.edges_path : edges;
  const std::string action_path = actions.empty() ? cfg.network.actions_path : actions;
  if (edge_path.empty() || action_path.empty()) {
    throw mwc::ConfigError("estimate-probs needs --edges and --actions (or network.edges / network.actions)");
  }
  mwc::GraphSummary summary;
  const auto g = mwc::load_edge_list(edge_path, &summary);
  const auto probs = mwc::estimate_probabilities(g, mwc::load_action_log(action_path, g));
  const auto dir = mwc::make_run_dir(cfg.output_dir, cfg.experiment_id + "-estimate-probs");
  {
    auto os = open_out(dir / "probabilities.csv");
    mwc::write_probabilities_csv(os, g, probs);
  }
  std::cerr << "nodes=" << summary.nodes << " edges=" << summary.edges << " max_degree=" << summary.max_degree
            << " avg_degree=" << summary.avg_degree << '\n';
  finish_run(dir, cfg, "estimate-probs", c.threads, {"probabilities.csv"});
  return kExitOk;
}

int cmd_simulate(const Common& c, double sigma, std::size_t repetition) {
  auto cfg = resolve(c);
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw mwc::ConfigError("--sigma must lie in [0,1]");
  const mwc::NetworkProvider provider(cfg);
  const auto net = provider.get(repetition);
  const auto profiles = mwc::sample_profiles(cfg.attack_mix, net.graph.size(),
                                             mwc::derive_seed(cfg.rng_seed, {mwc::stream::profiles, 99, repetition}));
  auto cascade_cfg = cfg.cascade;
  cascade_cfg.rng_seed = mwc::derive_seed(cfg.rng_seed, {mwc::stream::cascade, repetition});
  const auto params = cfg.params.with_sigma(sigma);
  const auto result = mwc::simulate_cascade(net.graph, net.probs, cascade_cfg, profiles, cfg.effort_model, params);
  const auto report = mwc::run_mechanism(result.dag, params, c.threads);

  const auto dir = mwc::make_run_dir(cfg.output_dir, cfg.experiment_id + "-simulate");
  {
    auto os = open_out(dir / "referral_dag.txt");
    mwc::write_dag(os, result.dag);
  }
  {
    auto os = open_out(dir / "rewards.csv");
    mwc::write_reward_csv(os, report);
  }
  {
    auto os = open_out(dir / "activation.csv");
    os << "node_id,user_label\n";
    for (std::size_t i = 0; i < result.user_of.size(); ++i) {
      os << i << ',' << net.graph.label(result.user_of[i]) << '\n';
    }
  }
  {
    auto os = open_out(dir / "profiles.csv");
    mwc::write_profiles_csv(os, result.profiles);
  }
  std::cerr << "activated=" << result.dag.size() << " rounds=" << result.rounds
            << " total_effort=" << report.totals.effort << " payout_ratio=" << report.payout_ratio() << '\n';
  finish_run(dir, cfg, "simulate", c.threads, {"referral_dag.txt", "rewards.csv", "activation.csv", "profiles.csv"});
  return kExitOk;
}

int cmd_sweep(const Common& c) {
  auto cfg = resolve(c);
  const auto rows = mwc::run_noise_sweep(cfg, c.threads);
  const auto dir = mwc::make_run_dir(cfg.output_dir, cfg.experiment_id + "-sweep-noise");
  {
    auto os = open_out(dir / "results.csv");
    mwc::write_results_csv(os, rows);
  }
  const auto summary = mwc::sweep_summary_json(rows);
  {
    auto os = open_out(dir / "summary.json");
    os << summary.dump(2) << '\n';
  }
  const auto violations = summary["budget_violations"].get<std::size_t>();
  if (violations) std::cerr << "budget audit: " << violations << " rows with payout_ratio > 1\n";
  finish_run(dir, cfg, "sweep-noise", c.threads, {"results.csv", "summary.json"});
  return kExitOk;
}

int cmd_attack(const Common& c) {
  auto cfg = resolve(c);
  const auto rows = mwc::run_attack_eval(cfg, c.threads);
  const auto dir = mwc::make_run_dir(cfg.output_dir, cfg.experiment_id + "-attack-eval");
  {
    auto os = open_out(dir / "attack_results.csv");
    mwc::write_attack_csv(os, rows);
  }
  {
    auto os = open_out(dir / "attack_summary.json");
    os << mwc::attack_summary_json(rows).dump(2) << '\n';
  }
  finish_run(dir, cfg, "attack-eval", c.threads, {"attack_results.csv", "attack_summary.json"});
  return kExitOk;
}

int cmd_bench(const Common& c, std::vector<std::size_t> sizes) {
  auto cfg = resolve(c);
  if (sizes.empty()) sizes = cfg.bench.sizes;
  const auto result = mwc::run_scaling_bench(cfg, sizes, c.threads);
  const auto dir = mwc::make_run_dir(cfg.output_dir, cfg.experiment_id + "-bench");
  {
    auto os = open_out(dir / "bench.csv");
    mwc::write_bench_csv(os, result);
  }
  {
    auto os = open_out(dir / "bench_summary.json");
    os << nlohmann::ordered_json{{"exponent", result.exponent}}.dump(2) << '\n';
  }
  for (const auto& r : result.rows) std::cerr << "n=" << r.nodes << " ms=" << r.wall_time_ms << '\n';
  std::cerr << "growth exponent " << result.exponent << '\n';
  finish_run(dir, cfg, "bench", c.threads, {"bench.csv", "bench_summary.json"});
  return kExitOk;
}

int cmd_verify(const Common& c) {
  mwc::PropertyOptions opt;
  if (!c.config.empty()) opt.seed = mwc::load_config(c.config).rng_seed;
  if (c.seed) opt.seed = *c.seed;
  opt.threads = c.threads;
  const auto results = mwc::run_property_suite(opt);
  mwc::write_property_report(std::cout, results);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    {
      auto os = open_out(fs::path(c.out) / "properties.csv");
      mwc::write_property_report(os, results);
    }
  }
  bool ok = true;
  for (const auto& r : results) {
    if (r.passed()) continue;
    ok = false;
    std::cerr << r.name << ": " << r.violations << '/' << r.trials << " violations, worst " << r.worst;
    if (!r.detail.empty()) std::cerr << " (" << r.detail << ')';
    std::cerr << '\n';
  }
  return ok ? kExitOk : kExitProperty;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-winner contest mechanism experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mwc::kVersion);

  Common common;
  std::string edges, actions;
  double sigma = 0.5;
  std::size_t repetition = 0;
  std::vector<std::size_t> sizes;

  auto* estimate = app.add_subcommand("estimate-probs", "learn static Bernoulli influence probabilities");
  add_common(estimate, common);
  estimate->add_option("--edges", edges, "edge list (from<TAB>to)");
  estimate->add_option("--actions", actions, "action log (user,action,timestamp)");

  auto* simulate = app.add_subcommand("simulate", "one cascade plus settlement");
  add_common(simulate, common);
  simulate->add_option("--sigma", sigma, "noise factor");
  simulate->add_option("--repetition", repetition, "which network / threshold draw");

  auto* sweep = app.add_subcommand("sweep-noise", "total effort per group over the sigma grid");
  add_common(sweep, common);
  auto* attack = app.add_subcommand("attack-eval", "normalized false-name attack rewards");
  add_common(attack, common);
  auto* bench = app.add_subcommand("bench", "time the credit and reward pass");
  add_common(bench, common);
  bench->add_option("--sizes", sizes, "node counts");
  auto* verify = app.add_subcommand("verify", "run the property suite");
  add_common(verify, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*estimate) return cmd_estimate(common, edges, actions);
    if (*simulate) return cmd_simulate(common, sigma, repetition);
    if (*sweep) return cmd_sweep(common);
    if (*attack) return cmd_attack(common);
    if (*bench) return cmd_bench(common, sizes);
    if (*verify) return cmd_verify(common);
  } catch (const mwc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
