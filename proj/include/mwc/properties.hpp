#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mwc/attack.hpp"
#include "mwc/cascade.hpp"
#include "mwc/dag_generators.hpp"
#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"
#include "mwc/parallel.hpp"
#include "mwc/population.hpp"
#include "mwc/rng.hpp"

namespace mwc {

struct GroupTally {
  std::size_t trials = 0;
  std::size_t violations = 0;
};

struct PropertyResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst = 0.0;                          // largest violation magnitude
  std::string detail;                          // first violation, if any
  std::map<std::string, GroupTally> breakdown; // per trial group
  double seconds = 0.0;                        // not part of deterministic output

  bool passed() const noexcept { return trials > 0 && violations == 0; }
};

struct PropertyOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

namespace props {

inline constexpr std::uint64_t kOracle = 1;
inline constexpr std::uint64_t kFalseName = 2;
inline constexpr std::uint64_t kCreditSplit = 3;
inline constexpr std::uint64_t kRationality = 4;
inline constexpr std::uint64_t kBudget = 5;
inline constexpr std::uint64_t kMonotonicity = 6;
inline constexpr std::uint64_t kSubgraph = 7;
inline constexpr std::uint64_t kCsf = 8;

inline Rng trial_rng(const PropertyOptions& o, std::uint64_t property, std::size_t trial) {
  return make_rng(o.seed, {stream::property, property, trial});
}

/// Random valid parameters: lambda in (0.05, 0.95), eta >= lambda/2.
inline MechanismParams random_params(Rng& rng, double sigma) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MechanismParams p;
  p.lambda = 0.05 + 0.9 * unit(rng);
  p.eta = p.lambda / 2.0 + unit(rng);
  p.mu = 0.1 + unit(rng);
  p.phi = 0.01 + 0.5 * unit(rng);
  p.sigma = sigma;
  return p;
}

inline ReferralDag random_small_dag(Rng& rng, std::size_t min_nodes, std::size_t max_nodes, double zero_fraction) {
  std::uniform_int_distribution<std::size_t> size(min_nodes, max_nodes);
  std::uniform_real_distribution<double> density(0.1, 0.6);
  RandomDagOptions opt;
  opt.nodes = size(rng);
  opt.edge_probability = density(rng);
  opt.zero_effort_fraction = zero_fraction;
  return random_referral_dag(rng, opt);
}

/// Referral tree: every non-root node has exactly one direct predecessor.
inline ReferralDag random_tree(Rng& rng, std::size_t min_nodes, std::size_t max_nodes) {
  std::uniform_int_distribution<std::size_t> size(min_nodes, max_nodes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ReferralDag dag;
  const std::size_t n = size(rng);
  dag.add_node(1.0 - unit(rng));
  for (std::size_t i = 1; i < n; ++i) {
    const NodeId parent = std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(i - 1))(rng);
    dag.add_node(1.0 - unit(rng), {parent});
  }
  return dag;
}

inline std::string describe(const ReferralDag& dag) {
  std::ostringstream os;
  write_dag(os, dag);
  auto s = os.str();
  std::replace(s.begin(), s.end(), '\n', ';');
  return s;
}

struct TrialOutcome {
  bool counted = true;
  std::string group;
  double violation = 0.0;  // > 0 marks a violation
  std::string note;
};

template <class Trial>
PropertyResult run_trials(std::string name, std::size_t trials, const PropertyOptions& opt, Trial&& trial) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrialOutcome> outcomes(trials);
  parallel_for(trials, opt.threads, [&](std::size_t i, unsigned) { outcomes[i] = trial(i); });
  PropertyResult r;
  r.name = std::move(name);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto& o = outcomes[i];
    if (!o.counted) continue;
    ++r.trials;
    auto& g = r.breakdown[o.group.empty() ? "all" : o.group];
    ++g.trials;
    if (o.violation > 0.0) {
      if (r.violations == 0) r.detail = "trial " + std::to_string(i) + ": " + o.note;
      ++r.violations;
      ++g.violations;
      r.worst = std::max(r.worst, o.violation);
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct Instance {
  ReferralDag dag;
  std::vector<double> delta;
  MechanismParams params;
  std::string group;
};

/// Even trials: small random DAGs with random deltas and parameters. Odd
/// trials: a cascade on a synthetic network with sampled profiles.
inline Instance random_instance(Rng& rng, std::size_t trial) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Instance in;
  if (trial % 2 == 0) {
    in.dag = random_small_dag(rng, 2, 40, 0.2);
    in.params = random_params(rng, unit(rng));
    for (std::size_t i = 0; i < in.dag.size(); ++i) in.delta.push_back(1.0 - unit(rng));
    in.group = "random_dag";
    return in;
  }
  const auto net = generate_synthetic(trial % 4 == 1 ? NetworkModel::PreferentialAttachment : NetworkModel::ErdosRenyiDag,
                                      300, trial % 4 == 1 ? 3.0 : 0.01, rng(), 0.5);
  const auto profiles = sample_profiles(even_mix(), net.graph.size(), rng());
  in.params = MechanismParams{}.with_sigma(std::round(unit(rng) * 20.0) / 20.0);
  CascadeConfig cfg;
  cfg.seeds = 5;
  cfg.rng_seed = rng();
  EffortModel model;
  model.kind = trial % 8 < 4 ? EffortModelKind::BestResponse : EffortModelKind::AbilityProportional;
  auto c = simulate_cascade(net.graph, net.probs, cfg, profiles, model, in.params);
  in.dag = std::move(c.dag);
  for (const auto& p : c.profiles) in.delta.push_back(p.delta);
  in.group = std::string("cascade_") + std::string(to_string(model.kind));
  return in;
}

}  // namespace props

/// Incremental ledger vs path enumeration, relative tolerance 1e-9.
inline PropertyResult check_oracle_equivalence(const PropertyOptions& opt, std::size_t trials = 500) {
  return props::run_trials("oracle_equivalence", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kOracle, i);
    const auto dag = props::random_small_dag(rng, 1, kBruteForceNodeLimit, 0.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto params = props::random_params(rng, unit(rng));
    const auto ledger = build_ledger(dag, params);
    const auto brute = compute_credits_bruteforce(dag, params);
    props::TrialOutcome out;
    for (NodeId v = 0; v < dag.size(); ++v) {
      const double rel = std::abs(ledger.credit(v) - brute[v]) / std::max(std::abs(brute[v]), 1e-300);
      if (rel > 1e-9 && rel > out.violation) {
        out.violation = rel;
        out.note = "node " + std::to_string(v) + " ledger " + format_real(ledger.credit(v)) + " oracle " +
                   format_real(brute[v]) + " in " + props::describe(dag);
      }
    }
    return out;
  });
}

namespace props {

struct AttackTrial {
  ReferralDag dag;
  AttackSpec spec;
  MechanismParams params;
  std::string group;
};

/// Rotates over shapes/policies, splits and sigma in {0.25, 0.5, 0.75, 1}; m in [2, 8].
inline std::optional<AttackTrial> random_attack_trial(Rng& rng, std::size_t i) {
  static constexpr double kSigmas[] = {0.25, 0.5, 0.75, 1.0};
  static constexpr std::pair<AttackShape, SuccessorPolicy> kKinds[] = {
      {AttackShape::Chain, SuccessorPolicy::Shared},       {AttackShape::Parallel, SuccessorPolicy::Shared},
      {AttackShape::Parallel, SuccessorPolicy::Partitioned}, {AttackShape::Hybrid, SuccessorPolicy::Shared},
      {AttackShape::Hybrid, SuccessorPolicy::Partitioned}};
  const auto [shape, policy] = kKinds[i % std::size(kKinds)];
  const double sigma = kSigmas[(i / std::size(kKinds)) % std::size(kSigmas)];
  std::uniform_int_distribution<std::size_t> replicas(2, 8);
  const std::size_t m = replicas(rng);
  const auto split = (i / 20) % 2 ? SplitStrategy::Dirichlet : SplitStrategy::Equal;
  const auto params = random_params(rng, sigma);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto dag = random_small_dag(rng, 3, 14, 0.1);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(dag.size() - 1));
    auto spec = sample_attack(dag, pick(rng), shape, policy, m, split, rng);
    if (!spec) continue;
    std::string group(to_string(shape));
    if (shape != AttackShape::Chain) group += "/" + std::string(to_string(policy));
    return AttackTrial{std::move(dag), std::move(*spec), params, std::move(group)};
  }
  return std::nullopt;
}

inline std::string describe(const AttackTrial& t) {
  std::ostringstream os;
  os << t.group << " m=" << t.spec.replica_count << " sigma=" << t.params.sigma << " lambda=" << t.params.lambda
     << " eta=" << t.params.eta << " target=" << t.spec.target << " in " << describe(t.dag);
  return os.str();
}

}  // namespace props

/**
 * Reward-level false-name-proofness: an attack may never leave the replicas
 * with more total reward than the target, and the loss must be strict when
 * the target has a positive-effort successor. A few draws find no feasible
 * partitioned attack and are not counted, hence the margin over 1000.
 */
inline PropertyResult check_false_name_proofness(const PropertyOptions& opt, std::size_t trials = 1010) {
  return props::run_trials("false_name_proofness", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kFalseName, i);
    const auto t = props::random_attack_trial(rng, i);
    if (!t) return props::TrialOutcome{false, {}, 0.0, {}};
    const auto o = evaluate_attack(t->dag, t->params, t->spec);
    bool positive_successor = false;
    for (NodeId u : successors(t->dag, t->spec.target)) positive_successor |= t->dag.effort(u) > 0.0;
    props::TrialOutcome out;
    out.group = t->group;
    if (positive_successor ? !(o.profit < 0.0) : o.profit > 0.0) {
      out.violation = std::max(o.profit, std::numeric_limits<double>::min());
      out.note = "baseline " + format_real(o.baseline_reward) + " replicas " + format_real(o.replica_total) + " " +
                 props::describe(*t);
    }
    return out;
  });
}

/// Splitting an identity strictly lowers total credit.
inline PropertyResult check_credit_split(const PropertyOptions& opt, std::size_t trials = 1000) {
  return props::run_trials("credit_split", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kCreditSplit, i);
    const auto t = props::random_attack_trial(rng, i);
    if (!t) return props::TrialOutcome{false, {}, 0.0, {}};
    const auto after = apply_attack(t->dag, t->spec);
    const double before = build_ledger(t->dag, t->params).credit(t->spec.target);
    const auto ledger = build_ledger(after.graph, t->params);
    double total = 0.0;
    for (NodeId r : after.replicas) total += ledger.credit(r);
    props::TrialOutcome out;
    out.group = t->group;
    if (!(total < before)) {
      out.violation = std::max(total - before, std::numeric_limits<double>::min());
      out.note = "target credit " + format_real(before) + " replicas " + format_real(total) + " " + props::describe(*t);
    }
    return out;
  });
}

/// Every participant with a positive-effort successor earns a positive
/// diffusion reward, and every participant with delta < mu has positive utility.
inline PropertyResult check_individual_rationality(const PropertyOptions& opt, std::size_t instances = 200) {
  return props::run_trials("individual_rationality", instances, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kRationality, i);
    const auto in = props::random_instance(rng, i);
    const auto report = run_mechanism(in.dag, in.params);
    props::TrialOutcome out;
    out.group = in.group;
    for (NodeId v = 0; v < in.dag.size(); ++v) {
      if (!(in.dag.effort(v) > 0.0)) continue;
      bool positive_successor = false;
      for (NodeId u : successors(in.dag, v)) positive_successor |= in.dag.effort(u) > 0.0;
      const auto& row = report.at(v);
      std::string what;
      if (positive_successor && !(row.pi_d > 0.0)) what = "pi_d " + format_real(row.pi_d);
      const double u = utility(report, v, in.delta[v]);
      if (in.delta[v] < in.params.mu && !(u > 0.0)) what = "utility " + format_real(u);
      if (!what.empty()) {
        out.violation = 1.0;
        out.note = "node " + std::to_string(v) + " " + what + " in " + props::describe(in.dag);
        break;
      }
    }
    return out;
  });
}

/// Total payout never exceeds (mu + phi) times total effort.
inline PropertyResult check_budget(const PropertyOptions& opt, std::size_t instances = 200) {
  return props::run_trials("budget_balance", instances, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kBudget, i);
    const auto in = props::random_instance(rng, i);
    const auto report = run_mechanism(in.dag, in.params);
    props::TrialOutcome out;
    out.group = in.group;
    const double ratio = report.payout_ratio();
    if (ratio > 1.0) {
      out.violation = ratio - 1.0;
      out.note = "payout_ratio " + format_real(ratio) + " sigma " + format_real(in.params.sigma) + " in " +
                 props::describe(in.dag);
    }
    return out;
  });
}

/**
 * A new player with effort t attaches either directly below v2 (near) or
 * below w, a successor of v2 (far); v1 is an ancestor of v2. The diffusion
 * reward of v1 must not be smaller in the near case (1e-12 absolute slack).
 */
inline PropertyResult check_monotonicity(const PropertyOptions& opt, std::size_t trials = 500) {
  return props::run_trials("monotonicity", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kMonotonicity, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const bool tree = i % 2 == 0;
      auto dag = tree ? props::random_tree(rng, 3, 14) : props::random_small_dag(rng, 3, 14, 0.0);
      std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(dag.size() - 1));
      const NodeId v1 = pick(rng);
      const auto s1 = successors(dag, v1);
      if (s1.empty()) continue;
      const NodeId v2 = s1[std::uniform_int_distribution<std::size_t>(0, s1.size() - 1)(rng)];
      const auto s2 = successors(dag, v2);
      if (s2.empty()) continue;
      const NodeId w = s2[std::uniform_int_distribution<std::size_t>(0, s2.size() - 1)(rng)];
      const double t = 1.0 - unit(rng);
      const auto params = props::random_params(rng, unit(rng));
      auto near = dag;
      near.add_node(t, {v2});
      auto far = dag;
      far.add_node(t, {w});
      const double pn = run_mechanism(near, params).at(v1).pi_d;
      const double pf = run_mechanism(far, params).at(v1).pi_d;
      props::TrialOutcome out;
      out.group = tree ? "tree" : "dag";
      if (pn < pf - 1e-12) {
        out.violation = pf - pn;
        std::ostringstream note;
        note << "v1=" << v1 << " v2=" << v2 << " w=" << w << " t=" << format_real(t) << " sigma=" << params.sigma
             << " near " << format_real(pn) << " far " << format_real(pf) << " in " << props::describe(dag);
        out.note = note.str();
      }
      return out;
    }
    return props::TrialOutcome{false, {}, 0.0, {}};
  });
}

/**
 * Changes outside G_v leave pi(v) bit-identical. Three mutation kinds:
 * re-drawing efforts of outside nodes, appending players that only follow
 * outside nodes, and inserting such a player earlier in join order.
 */
inline PropertyResult check_subgraph_constraint(const PropertyOptions& opt, std::size_t trials = 500) {
  return props::run_trials("subgraph_constraint", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kSubgraph, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto dag = props::random_small_dag(rng, 2, 30, 0.15);
    const auto params = props::random_params(rng, unit(rng));
    const NodeId v = std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(dag.size() - 1))(rng);
    const auto view = rooted_subgraph(dag, v);
    std::vector<char> inside(dag.size(), 0);
    for (NodeId x : view.nodes) inside[x] = 1;
    std::vector<NodeId> outside;
    for (NodeId x = 0; x < dag.size(); ++x) {
      if (!inside[x]) outside.push_back(x);
    }

    ReferralDag mutated;
    NodeId v_new = v;
    props::TrialOutcome out;
    const int kind = static_cast<int>(i % 3);
    if (kind == 0) {
      out.group = "outside_efforts";
      mutated = dag;
      for (NodeId x : outside) {
        if (unit(rng) < 0.7) mutated.set_effort(x, unit(rng) < 0.2 ? 0.0 : 1.0 - unit(rng));
      }
    } else if (kind == 1) {
      out.group = "append_outside";
      mutated = dag;
      const std::size_t extra = 1 + static_cast<std::size_t>(unit(rng) * 5);
      std::vector<NodeId> pool = outside;
      for (std::size_t k = 0; k < extra; ++k) {
        std::vector<NodeId> preds;
        for (NodeId x : pool) {
          if (unit(rng) < 0.4) preds.push_back(x);
        }
        pool.push_back(mutated.add_node(1.0 - unit(rng), preds));
      }
    } else {
      out.group = "insert_outside";
      const NodeId at = std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(dag.size()))(rng);
      std::vector<NodeId> map(dag.size());
      std::vector<NodeId> preds;
      NodeId added = 0;
      for (NodeId x = 0; x <= dag.size(); ++x) {
        if (x == at) {
          preds.clear();
          for (NodeId y : outside) {
            if (y < at && unit(rng) < 0.5) preds.push_back(map[y]);
          }
          added = mutated.add_node(1.0 - unit(rng), preds);
        }
        if (x == dag.size()) break;
        preds.clear();
        for (NodeId p : dag.direct_predecessors(x)) preds.push_back(map[p]);
        // later outside players may also follow the newcomer
        if (x >= at && !inside[x] && unit(rng) < 0.3) preds.push_back(added);
        map[x] = mutated.add_node(dag.effort(x), preds);
      }
      v_new = map[v];
    }
    const auto a = run_mechanism(dag, params).at(v);
    const auto b = run_mechanism(mutated, params).at(v_new);
    if (a.pi_total != b.pi_total || a.pi_d != b.pi_d) {
      out.violation = std::max(std::abs(a.pi_total - b.pi_total), std::numeric_limits<double>::min());
      out.note = "node " + std::to_string(v) + " " + out.group + " " + format_real(a.pi_total) + " vs " +
                 format_real(b.pi_total) + " in " + props::describe(dag);
    }
    return out;
  });
}

/// n equal credits give 1/n each for sigma in {0, 0.5, 1}; sigma = 0 is uniform for any credits.
inline PropertyResult check_csf_uniformity(const PropertyOptions& opt, std::size_t trials = 300) {
  return props::run_trials("csf_uniformity", trials, opt, [&](std::size_t i) {
    Rng rng = props::trial_rng(opt, props::kCsf, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = 1 + i % 60;
    props::TrialOutcome out;
    const double c = std::exp(20.0 * unit(rng) - 10.0);
    std::vector<double> equal(n, c);
    for (double sigma : {0.0, 0.5, 1.0}) {
      for (double p : contest_success(equal, sigma)) {
        const double err = std::abs(p - 1.0 / static_cast<double>(n));
        if (err > 1e-12 && err > out.violation) {
          out.violation = err;
          out.note = "equal credits n=" + std::to_string(n) + " sigma=" + format_real(sigma);
        }
      }
    }
    std::vector<double> mixed(n);
    for (auto& b : mixed) b = std::exp(20.0 * unit(rng) - 10.0);
    for (double p : contest_success(mixed, 0.0)) {
      const double err = std::abs(p - 1.0 / static_cast<double>(n));
      if (err > 1e-12 && err > out.violation) {
        out.violation = err;
        out.note = "sigma=0 with mixed credits n=" + std::to_string(n);
      }
    }
    return out;
  });
}

/// The full suite in a fixed order.
inline std::vector<PropertyResult> run_property_suite(const PropertyOptions& opt) {
  return {check_oracle_equivalence(opt),   check_false_name_proofness(opt), check_credit_split(opt),
          check_individual_rationality(opt), check_budget(opt),               check_monotonicity(opt),
          check_subgraph_constraint(opt),  check_csf_uniformity(opt)};
}

/// Deterministic report: timings are left out.
inline void write_property_report(std::ostream& os, const std::vector<PropertyResult>& results) {
  os << "property,group,trials,violations\n";
  for (const auto& r : results) {
    os << r.name << ",all," << r.trials << ',' << r.violations << '\n';
    for (const auto& [group, t] : r.breakdown) {
      if (r.breakdown.size() > 1) os << r.name << ',' << group << ',' << t.trials << ',' << t.violations << '\n';
    }
  }
}

}  // namespace mwc
