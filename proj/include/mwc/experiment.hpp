#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mwc/attack.hpp"
#include "mwc/cascade.hpp"
#include "mwc/dag_generators.hpp"
#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"
#include "mwc/parallel.hpp"
#include "mwc/population.hpp"
#include "mwc/report_io.hpp"
#include "mwc/rng.hpp"

namespace mwc {

inline constexpr const char* kVersion = "1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkSource {
  enum class Kind { Synthetic, Files } kind = Kind::Synthetic;
  NetworkModel model = NetworkModel::PreferentialAttachment;
  std::size_t nodes = 2000;
  double density = 5.0;  // PA: followers per new user; ER: edge probability
  double p_max = 1.0;
  bool largest_component = false;
  std::string edges_path;          // Files: edge list
  std::string probabilities_path;  // Files: from,to,p (takes precedence)
  std::string actions_path;        // Files: action log to estimate from
};

struct AttackEvalConfig {
  std::vector<double> sigmas{0.4, 0.5, 0.6, 0.7};
  std::size_t max_false_identities = 10;
  std::vector<AttackShape> shapes{AttackShape::Chain, AttackShape::Parallel, AttackShape::Hybrid};
  SuccessorPolicy policy = SuccessorPolicy::Shared;
  SplitStrategy split = SplitStrategy::Equal;
  std::size_t targets_per_network = 1;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{1000, 2000, 4000, 8000};
  double mean_in_degree = 5.0;  // total degree about twice this
  std::size_t repeats = 3;      // best of
};

struct ExperimentConfig {
  std::string experiment_id = "default";
  MechanismParams params{};
  std::vector<double> sigma_grid;
  std::size_t repetitions = 20;
  std::vector<AbilityGroup> sweep_groups{AbilityGroup::HO, AbilityGroup::HL, AbilityGroup::HH, AbilityGroup::DI};
  GroupMix attack_mix = even_mix();
  NetworkSource network{};
  CascadeConfig cascade{SeedRule::UniformRandom, 10, 0, 1000};
  EffortModel effort_model{};
  AttackEvalConfig attack{};
  BenchConfig bench{};
  std::uint64_t rng_seed = 42;
  std::string output_dir = "runs";

  ExperimentConfig() {
    for (int i = 0; i <= 20; ++i) sigma_grid.push_back(i / 20.0);
  }

  void validate() const {
    auto checked = params;
    checked.sigma = 0.5;
    try {
      checked.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("params: ") + e.what());
    }
    if (sigma_grid.empty()) throw ConfigError("sigma_grid must not be empty");
    for (double s : sigma_grid) {
      if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("sigma_grid values must lie in [0,1]");
    }
    for (double s : attack.sigmas) {
      if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("attack.sigmas values must lie in [0,1]");
    }
    if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
    if (cascade.seeds == 0) throw ConfigError("cascade.seeds must be at least 1");
    if (sweep_groups.empty()) throw ConfigError("population.groups must not be empty");
    if (attack.shapes.empty()) throw ConfigError("attack.shapes must not be empty");
    if (!(effort_model.grid_step > 0.0 && effort_model.grid_step <= 1.0)) {
      throw ConfigError("effort_model.grid_step must lie in (0,1]");
    }
    if (effort_model.max_rounds == 0) throw ConfigError("effort_model.max_rounds must be at least 1");
    if (network.kind == NetworkSource::Kind::Files && network.edges_path.empty()) {
      throw ConfigError("network.edges is required when network.source is \"files\"");
    }
    if (network.kind == NetworkSource::Kind::Synthetic && network.nodes == 0) {
      throw ConfigError("network.nodes must be at least 1");
    }
  }
};

namespace config_detail {

using nlohmann::json;
using nlohmann::ordered_json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end()) {
      throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

template <class T, class Parse>
void read_enum(const json& j, const char* key, T& out, const std::string& where, Parse parse) {
  std::string text;
  read(j, key, text, where);
  if (text.empty()) return;
  try {
    out = parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError((where.empty() ? std::string(key) : where + "." + key) + ": " + e.what());
  }
}

inline NetworkModel parse_network_model(std::string_view s) {
  for (auto m : {NetworkModel::ErdosRenyiDag, NetworkModel::PreferentialAttachment}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown network model '" + std::string(s) + "'");
}

inline SeedRule parse_seed_rule(std::string_view s) {
  for (auto r : {SeedRule::UniformRandom, SeedRule::TopOutDegree}) {
    if (to_string(r) == s) return r;
  }
  throw std::invalid_argument("unknown seed rule '" + std::string(s) + "'");
}

inline EffortModelKind parse_effort_kind(std::string_view s) {
  for (auto k : {EffortModelKind::AbilityProportional, EffortModelKind::BestResponse}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown effort model '" + std::string(s) + "'");
}

inline std::vector<double> read_grid(const json& j, const std::string& where) {
  if (j.is_array()) {
    std::vector<double> out;
    for (const auto& x : j) {
      if (!x.is_number()) throw ConfigError(where + " must hold numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  reject_unknown(j, {"start", "stop", "step"}, where);
  double start = 0.0, stop = 1.0, step = 0.05;
  read(j, "start", start, where);
  read(j, "stop", stop, where);
  read(j, "step", step, where);
  if (!(step > 0.0) || stop < start) throw ConfigError(where + " needs step > 0 and stop >= start");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

}  // namespace config_detail

/// Parses the JSON config; absent keys keep their defaults, unknown keys are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  ExperimentConfig c;
  reject_unknown(j, {"experiment_id", "params", "sigma_grid", "repetitions", "population", "network", "cascade",
                     "effort_model", "attack", "bench", "rng_seed", "output_dir"},
                 "");
  read(j, "experiment_id", c.experiment_id, "");
  if (j.contains("params")) {
    const auto& p = j["params"];
    reject_unknown(p, {"lambda", "eta", "mu", "phi"}, "params");
    read(p, "lambda", c.params.lambda, "params");
    read(p, "eta", c.params.eta, "params");
    read(p, "mu", c.params.mu, "params");
    read(p, "phi", c.params.phi, "params");
  }
  if (j.contains("sigma_grid")) c.sigma_grid = read_grid(j["sigma_grid"], "sigma_grid");
  read(j, "repetitions", c.repetitions, "");
  if (j.contains("population")) {
    const auto& p = j["population"];
    reject_unknown(p, {"groups", "attack_mix"}, "population");
    if (p.contains("groups")) {
      c.sweep_groups.clear();
      std::vector<std::string> names;
      read(p, "groups", names, "population");
      for (const auto& n : names) {
        try {
          c.sweep_groups.push_back(parse_group(n));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("population.groups: ") + e.what());
        }
      }
    }
    if (p.contains("attack_mix")) {
      std::map<std::string, double> mix;
      read(p, "attack_mix", mix, "population");
      c.attack_mix.clear();
      for (const auto& [name, f] : mix) {
        try {
          c.attack_mix.emplace_back(parse_group(name), f);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("population.attack_mix: ") + e.what());
        }
      }
      std::sort(c.attack_mix.begin(), c.attack_mix.end());
    }
  }
  if (j.contains("network")) {
    const auto& n = j["network"];
    reject_unknown(n, {"source", "model", "nodes", "density", "p_max", "largest_component", "edges",
                       "probabilities", "actions"},
                   "network");
    std::string source = "synthetic";
    read(n, "source", source, "network");
    if (source == "synthetic") {
      c.network.kind = NetworkSource::Kind::Synthetic;
    } else if (source == "files") {
      c.network.kind = NetworkSource::Kind::Files;
    } else {
      throw ConfigError("network.source must be \"synthetic\" or \"files\"");
    }
    read_enum(n, "model", c.network.model, "network", parse_network_model);
    read(n, "nodes", c.network.nodes, "network");
    read(n, "density", c.network.density, "network");
    read(n, "p_max", c.network.p_max, "network");
    read(n, "largest_component", c.network.largest_component, "network");
    read(n, "edges", c.network.edges_path, "network");
    read(n, "probabilities", c.network.probabilities_path, "network");
    read(n, "actions", c.network.actions_path, "network");
  }
  if (j.contains("cascade")) {
    const auto& s = j["cascade"];
    reject_unknown(s, {"seed_rule", "seeds", "max_rounds"}, "cascade");
    read_enum(s, "seed_rule", c.cascade.seed_rule, "cascade", parse_seed_rule);
    read(s, "seeds", c.cascade.seeds, "cascade");
    read(s, "max_rounds", c.cascade.max_rounds, "cascade");
  }
  if (j.contains("effort_model")) {
    const auto& e = j["effort_model"];
    reject_unknown(e, {"kind", "grid_step", "max_rounds"}, "effort_model");
    read_enum(e, "kind", c.effort_model.kind, "effort_model", parse_effort_kind);
    read(e, "grid_step", c.effort_model.grid_step, "effort_model");
    read(e, "max_rounds", c.effort_model.max_rounds, "effort_model");
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    reject_unknown(a, {"sigmas", "max_false_identities", "shapes", "successor_policy", "split",
                       "targets_per_network"},
                   "attack");
    if (a.contains("sigmas")) c.attack.sigmas = read_grid(a["sigmas"], "attack.sigmas");
    read(a, "max_false_identities", c.attack.max_false_identities, "attack");
    if (a.contains("shapes")) {
      std::vector<std::string> names;
      read(a, "shapes", names, "attack");
      c.attack.shapes.clear();
      for (const auto& n : names) {
        try {
          c.attack.shapes.push_back(parse_shape(n));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("attack.shapes: ") + e.what());
        }
      }
    }
    read_enum(a, "successor_policy", c.attack.policy, "attack", parse_policy);
    read_enum(a, "split", c.attack.split, "attack", parse_split);
    read(a, "targets_per_network", c.attack.targets_per_network, "attack");
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    reject_unknown(b, {"sizes", "mean_in_degree", "repeats"}, "bench");
    read(b, "sizes", c.bench.sizes, "bench");
    read(b, "mean_in_degree", c.bench.mean_in_degree, "bench");
    read(b, "repeats", c.bench.repeats, "bench");
  }
  read(j, "rng_seed", c.rng_seed, "");
  read(j, "output_dir", c.output_dir, "");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return config_from_json(j);
}

/// Canonical form: every key, defaults filled in.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment_id"] = c.experiment_id;
  j["params"] = {{"lambda", c.params.lambda}, {"eta", c.params.eta}, {"mu", c.params.mu}, {"phi", c.params.phi}};
  j["sigma_grid"] = c.sigma_grid;
  j["repetitions"] = c.repetitions;
  auto groups = nlohmann::ordered_json::array();
  for (auto g : c.sweep_groups) groups.push_back(std::string(to_string(g)));
  nlohmann::ordered_json mix = nlohmann::ordered_json::object();
  for (const auto& [g, f] : c.attack_mix) mix[std::string(to_string(g))] = f;
  j["population"] = {{"groups", groups}, {"attack_mix", mix}};
  nlohmann::ordered_json net;
  net["source"] = c.network.kind == NetworkSource::Kind::Synthetic ? "synthetic" : "files";
  net["model"] = std::string(to_string(c.network.model));
  net["nodes"] = c.network.nodes;
  net["density"] = c.network.density;
  net["p_max"] = c.network.p_max;
  net["largest_component"] = c.network.largest_component;
  net["edges"] = c.network.edges_path;
  net["probabilities"] = c.network.probabilities_path;
  net["actions"] = c.network.actions_path;
  j["network"] = net;
  j["cascade"] = {{"seed_rule", std::string(to_string(c.cascade.seed_rule))},
                  {"seeds", c.cascade.seeds},
                  {"max_rounds", c.cascade.max_rounds}};
  j["effort_model"] = {{"kind", std::string(to_string(c.effort_model.kind))},
                       {"grid_step", c.effort_model.grid_step},
                       {"max_rounds", c.effort_model.max_rounds}};
  auto shapes = nlohmann::ordered_json::array();
  for (auto s : c.attack.shapes) shapes.push_back(std::string(to_string(s)));
  j["attack"] = {{"sigmas", c.attack.sigmas},
                 {"max_false_identities", c.attack.max_false_identities},
                 {"shapes", shapes},
                 {"successor_policy", std::string(to_string(c.attack.policy))},
                 {"split", std::string(to_string(c.attack.split))},
                 {"targets_per_network", c.attack.targets_per_network}};
  j["bench"] = {{"sizes", c.bench.sizes}, {"mean_in_degree", c.bench.mean_in_degree}, {"repeats", c.bench.repeats}};
  j["rng_seed"] = c.rng_seed;
  j["output_dir"] = c.output_dir;
  return j;
}

/// FNV-1a of the canonical config, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// The social network a repetition runs on: regenerated per repetition for
/// synthetic sources, loaded once for files.
class NetworkProvider {
 public:
  explicit NetworkProvider(const ExperimentConfig& c) : config_(c) {
    if (c.network.kind != NetworkSource::Kind::Files) return;
    GraphSummary summary;
    SyntheticNetwork net;
    net.graph = load_edge_list(c.network.edges_path, &summary);
    if (!c.network.probabilities_path.empty()) {
      net.probs = load_probabilities_csv(c.network.probabilities_path, net.graph);
    } else if (!c.network.actions_path.empty()) {
      net.probs = estimate_probabilities(net.graph, load_action_log(c.network.actions_path, net.graph));
    } else {
      throw ConfigError("network.probabilities or network.actions is required for file networks");
    }
    if (c.network.largest_component) net = largest_weak_component(net.graph, net.probs);
    fixed_ = std::move(net);
  }

  SyntheticNetwork get(std::size_t repetition) const {
    if (fixed_) return *fixed_;
    auto net = generate_synthetic(config_.network.model, config_.network.nodes, config_.network.density,
                                  derive_seed(config_.rng_seed, {stream::network, repetition}), config_.network.p_max);
    if (config_.network.largest_component) net = largest_weak_component(net.graph, net.probs);
    return net;
  }

 private:
  ExperimentConfig config_;
  std::optional<SyntheticNetwork> fixed_;
};

struct ResultRow {
  std::string experiment_id;
  std::string group;
  double sigma = 0.0;
  std::size_t repetition = 0;
  std::size_t activated = 0;
  double total_effort = 0.0;
  std::size_t participant_count = 0;
  double avg_effort_per_player = 0.0;
  double total_payout = 0.0;
  double payout_ratio = 0.0;
  bool budget_ok = true;
  bool converged = true;
  double wall_time_ms = 0.0;
};

inline constexpr const char* kResultCsvHeader =
    "experiment_id,group,sigma,repetition,activated,total_effort,participant_count,avg_effort_per_player,"
    "total_payout,payout_ratio,budget_ok,converged,wall_time_ms";

/// `with_timing = false` drops the wall_time_ms column for byte comparisons.
inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, bool with_timing = true) {
  std::string header = kResultCsvHeader;
  if (!with_timing) header.resize(header.rfind(','));
  os << header << '\n';
  for (const auto& r : rows) {
    os << r.experiment_id << ',' << r.group << ',' << format_real(r.sigma) << ',' << r.repetition << ','
       << r.activated << ',' << format_real(r.total_effort) << ',' << r.participant_count << ','
       << format_real(r.avg_effort_per_player) << ',' << format_real(r.total_payout) << ','
       << format_real(r.payout_ratio) << ',' << (r.budget_ok ? 1 : 0) << ',' << (r.converged ? 1 : 0);
    if (with_timing) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", r.wall_time_ms);
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline ResultRow make_row(const ExperimentConfig& c, std::string group, double sigma, std::size_t rep,
                          const ReferralDag& dag, const RewardReport& report) {
  ResultRow row;
  row.experiment_id = c.experiment_id;
  row.group = std::move(group);
  row.sigma = sigma;
  row.repetition = rep;
  row.activated = dag.size();
  row.total_effort = report.totals.effort;
  row.participant_count = report.totals.participants;
  row.avg_effort_per_player =
      row.participant_count ? row.total_effort / static_cast<double>(row.participant_count) : 0.0;
  row.total_payout = report.totals.total_reward;
  row.payout_ratio = report.payout_ratio();
  row.budget_ok = row.payout_ratio <= 1.0;
  return row;
}

/**
 * For every (group, sigma, repetition): network, profiles, cascade, efforts,
 * credits, rewards. The network, the profiles and the cascade thresholds
 * depend only on the repetition (and group for profiles), so every sigma of
 * a repetition sees the same players in the same referral DAG.
 */
inline std::vector<ResultRow> run_noise_sweep(const ExperimentConfig& c, unsigned threads = 1) {
  c.validate();
  const NetworkProvider provider(c);
  const std::size_t groups = c.sweep_groups.size();
  const std::size_t sigmas = c.sigma_grid.size();
  std::vector<ResultRow> rows(groups * sigmas * c.repetitions);
  parallel_for(groups * c.repetitions, threads, [&](std::size_t cell, unsigned) {
    const std::size_t gi = cell / c.repetitions;
    const std::size_t rep = cell % c.repetitions;
    const auto group = c.sweep_groups[gi];
    const auto net = provider.get(rep);
    const auto profiles = sample_profiles(pure_mix(group), net.graph.size(),
                                          derive_seed(c.rng_seed, {stream::profiles, static_cast<std::uint64_t>(group), rep}));
    auto cascade_cfg = c.cascade;
    cascade_cfg.rng_seed = derive_seed(c.rng_seed, {stream::cascade, rep});
    for (std::size_t si = 0; si < sigmas; ++si) {
      const auto start = std::chrono::steady_clock::now();
      const auto params = c.params.with_sigma(c.sigma_grid[si]);
      const auto result = simulate_cascade(net.graph, net.probs, cascade_cfg, profiles, c.effort_model, params);
      const auto report = run_mechanism(result.dag, params);
      auto row = make_row(c, std::string(to_string(group)), params.sigma, rep, result.dag, report);
      row.converged = c.effort_model.kind != EffortModelKind::BestResponse || result.best_response.converged;
      row.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      rows[(gi * sigmas + si) * c.repetitions + rep] = std::move(row);
    }
  });
  return rows;
}

struct SweepCell {
  std::string group;
  double sigma = 0.0;
  std::size_t n = 0;
  double mean_total_effort = 0.0;
  double sd_total_effort = 0.0;
  double mean_participants = 0.0;
  double mean_avg_effort = 0.0;
  double max_payout_ratio = 0.0;
};

/// Per (group, sigma) means in input order of first appearance.
inline std::vector<SweepCell> summarize_sweep(const std::vector<ResultRow>& rows) {
  std::vector<SweepCell> cells;
  std::map<std::pair<std::string, double>, std::size_t> index;
  std::vector<double> sq;
  for (const auto& r : rows) {
    auto [it, fresh] = index.try_emplace({r.group, r.sigma}, cells.size());
    if (fresh) {
      cells.push_back(SweepCell{r.group, r.sigma});
      sq.push_back(0.0);
    }
    auto& c = cells[it->second];
    ++c.n;
    c.mean_total_effort += r.total_effort;
    sq[it->second] += r.total_effort * r.total_effort;
    c.mean_participants += static_cast<double>(r.participant_count);
    c.mean_avg_effort += r.avg_effort_per_player;
    c.max_payout_ratio = std::max(c.max_payout_ratio, r.payout_ratio);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& c = cells[i];
    const double n = static_cast<double>(c.n);
    c.mean_total_effort /= n;
    c.mean_participants /= n;
    c.mean_avg_effort /= n;
    c.sd_total_effort = c.n > 1 ? std::sqrt(std::max(0.0, (sq[i] - n * c.mean_total_effort * c.mean_total_effort) / (n - 1))) : 0.0;
  }
  return cells;
}

inline nlohmann::ordered_json sweep_summary_json(const std::vector<ResultRow>& rows) {
  nlohmann::ordered_json j;
  auto cells = nlohmann::ordered_json::array();
  std::map<std::string, std::pair<double, double>> peak;  // group -> (sigma, mean)
  for (const auto& c : summarize_sweep(rows)) {
    cells.push_back({{"group", c.group},
                     {"sigma", c.sigma},
                     {"repetitions", c.n},
                     {"mean_total_effort", c.mean_total_effort},
                     {"sd_total_effort", c.sd_total_effort},
                     {"mean_participants", c.mean_participants},
                     {"mean_avg_effort", c.mean_avg_effort},
                     {"max_payout_ratio", c.max_payout_ratio}});
    auto [it, fresh] = peak.try_emplace(c.group, c.sigma, c.mean_total_effort);
    if (!fresh && c.mean_total_effort > it->second.second) it->second = {c.sigma, c.mean_total_effort};
  }
  j["cells"] = cells;
  nlohmann::ordered_json peaks;
  for (const auto& [g, p] : peak) peaks[g] = {{"sigma", p.first}, {"mean_total_effort", p.second}};
  j["peak"] = peaks;
  std::size_t violations = 0;
  for (const auto& r : rows) violations += r.budget_ok ? 0 : 1;
  j["budget_violations"] = violations;
  return j;
}

/**
 * Attack curves: per repetition and attack sigma, one cascade on the mixed
 * population with efforts from the effort model at that sigma, then
 * attack_sweep on `targets_per_network` random targets.
 */
inline std::vector<AttackSweepRow> run_attack_eval(const ExperimentConfig& c, unsigned threads = 1) {
  c.validate();
  const NetworkProvider provider(c);
  const std::size_t sigmas = c.attack.sigmas.size();
  std::vector<std::vector<AttackSweepRow>> parts(c.repetitions * sigmas);
  parallel_for(parts.size(), threads, [&](std::size_t cell, unsigned) {
    const std::size_t rep = cell / sigmas;
    const double sigma = c.attack.sigmas[cell % sigmas];
    const auto net = provider.get(rep);
    const auto profiles = sample_profiles(c.attack_mix, net.graph.size(), derive_seed(c.rng_seed, {stream::profiles, 99, rep}));
    auto cascade_cfg = c.cascade;
    cascade_cfg.rng_seed = derive_seed(c.rng_seed, {stream::cascade, rep});
    const auto params = c.params.with_sigma(sigma);
    const auto result = simulate_cascade(net.graph, net.probs, cascade_cfg, profiles, c.effort_model, params);
    AttackSweepOptions opt;
    opt.shapes = c.attack.shapes;
    opt.policy = c.attack.policy;
    opt.split = c.attack.split;
    opt.max_false_identities = c.attack.max_false_identities;
    opt.sigmas = {sigma};
    opt.repetitions = c.attack.targets_per_network;
    opt.trial_offset = rep * c.attack.targets_per_network;
    opt.rng_seed = c.rng_seed;
    opt.threads = 1;
    parts[cell] = attack_sweep(result.dag, uniform_target_sampler(), params, opt);
  });
  std::vector<AttackSweepRow> rows;
  for (auto& p : parts) rows.insert(rows.end(), p.begin(), p.end());
  std::stable_sort(rows.begin(), rows.end(), [](const AttackSweepRow& a, const AttackSweepRow& b) {
    return std::tie(a.shape, a.sigma, a.m, a.trial) < std::tie(b.shape, b.sigma, b.m, b.trial);
  });
  return rows;
}

inline nlohmann::ordered_json attack_summary_json(const std::vector<AttackSweepRow>& rows) {
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : summarize_attack(rows)) {
    cells.push_back({{"shape", std::string(to_string(c.shape))},
                     {"sigma", c.sigma},
                     {"m", c.m},
                     {"trials", c.trials},
                     {"mean", c.mean},
                     {"stddev", c.stddev}});
  }
  return {{"cells", cells}};
}

struct BenchRow {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double wall_time_ms = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double exponent = 0.0;  // least-squares slope of log time on log n
};

/// Slope of log(y) on log(x) over points with positive coordinates.
inline double fit_growth_exponent(const std::vector<std::pair<double, double>>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0 && y > 0.0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double d = static_cast<double>(n) * sxx - sx * sx;
  return d != 0.0 ? (static_cast<double>(n) * sxy - sx * sy) / d : 0.0;
}

/// Times the full ledger + reward pass on sparse synthetic DAGs, best of `repeats`.
inline BenchResult run_scaling_bench(const ExperimentConfig& c, const std::vector<std::size_t>& sizes,
                                     unsigned threads = 1) {
  BenchResult out;
  std::vector<std::pair<double, double>> points;
  for (std::size_t n : sizes) {
    Rng rng = make_rng(c.rng_seed, {stream::bench, n});
    const auto dag = sparse_referral_dag(rng, n, c.bench.mean_in_degree);
    const auto params = c.params.with_sigma(0.5);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < std::max<std::size_t>(1, c.bench.repeats); ++k) {
      const auto start = std::chrono::steady_clock::now();
      const auto report = run_mechanism(dag, params, threads);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (report.nodes.size() != n) throw std::logic_error("bench report size mismatch");
      best = std::min(best, ms);
    }
    out.rows.push_back({n, dag.edge_count(), best});
    points.emplace_back(static_cast<double>(n), best);
  }
  out.exponent = fit_growth_exponent(points);
  return out;
}

inline void write_bench_csv(std::ostream& os, const BenchResult& r) {
  os << "nodes,edges,wall_time_ms\n";
  for (const auto& row : r.rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", row.wall_time_ms);
    os << row.nodes << ',' << row.edges << ',' << buf << '\n';
  }
}

/// A fresh directory under `root`; an existing name gets a numeric suffix, so reruns never overwrite.
inline std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& stem) {
  std::filesystem::create_directories(root);
  for (int k = 0;; ++k) {
    auto dir = root / (k == 0 ? stem : stem + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

inline std::string utc_timestamp(const char* format = "%Y%m%dT%H%M%SZ") {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

inline nlohmann::ordered_json run_meta(const ExperimentConfig& c, const std::string& command, unsigned threads,
                                       const std::vector<std::string>& files) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["experiment_id"] = c.experiment_id;
  j["config_hash"] = config_hash(c);
  j["rng_seed"] = c.rng_seed;
  j["threads"] = threads;
  j["version"] = kVersion;
  j["created_utc"] = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
  j["params"] = {{"lambda", c.params.lambda}, {"eta", c.params.eta}, {"mu", c.params.mu}, {"phi", c.params.phi}};
  j["files"] = files;
  j["config"] = config_to_json(c);
  return j;
}

}  // namespace mwc
