#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"
#include "mwc/parallel.hpp"
#include "mwc/referral_dag.hpp"
#include "mwc/rng.hpp"

namespace mwc {

// Chain: replicas form a path (type 1). Parallel: replicas sit side by side
// (type 2). Hybrid: a chain of parallel blocks.
enum class AttackShape { Chain, Parallel, Hybrid };

// How the target's direct successors attach to the last block of replicas.
enum class SuccessorPolicy { Shared, Partitioned };

enum class SplitStrategy { Equal, Dirichlet };

inline std::string_view to_string(AttackShape s) {
  switch (s) {
    case AttackShape::Chain: return "chain";
    case AttackShape::Parallel: return "parallel";
    case AttackShape::Hybrid: return "hybrid";
  }
  return "?";
}

inline std::string_view to_string(SuccessorPolicy p) {
  return p == SuccessorPolicy::Shared ? "shared" : "partitioned";
}

inline std::string_view to_string(SplitStrategy s) {
  return s == SplitStrategy::Equal ? "equal" : "dirichlet";
}

class AttackError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * A false-name attack at `target`: the node is replaced by
 * `replica_count` identities whose efforts are `effort_split`.
 *
 * `hybrid_layout` lists block sizes from the top block (which inherits the
 * target's direct predecessors) to the bottom block (which inherits its
 * direct successors). It is only read for Hybrid attacks; Chain is the
 * layout {1,...,1} and Parallel is {m}.
 */
struct AttackSpec {
  NodeId target = 0;
  AttackShape shape = AttackShape::Chain;
  std::size_t replica_count = 2;
  std::vector<double> effort_split;
  SuccessorPolicy successor_policy = SuccessorPolicy::Shared;
  std::vector<std::size_t> hybrid_layout;

  std::vector<std::size_t> blocks() const {
    switch (shape) {
      case AttackShape::Chain: return std::vector<std::size_t>(replica_count, 1);
      case AttackShape::Parallel: return {replica_count};
      case AttackShape::Hybrid: return hybrid_layout;
    }
    return {};
  }

  void validate(const ReferralDag& dag) const {
    if (!dag.contains(target)) throw AttackError("attack target does not exist");
    const double t = dag.effort(target);
    if (!(t > 0.0)) throw AttackError("attack target must have positive effort");
    if (replica_count < 2) throw AttackError("an attack needs at least two replicas");
    if (effort_split.size() != replica_count) throw AttackError("effort split size must equal replica count");
    double sum = 0.0;
    for (double x : effort_split) {
      if (!(x > 0.0)) throw AttackError("every replica needs positive effort");
      sum += x;
    }
    if (sum != t) throw AttackError("replica efforts must sum to the target's effort");
    const auto layout = blocks();
    if (layout.empty() || std::find(layout.begin(), layout.end(), std::size_t{0}) != layout.end() ||
        std::accumulate(layout.begin(), layout.end(), std::size_t{0}) != replica_count) {
      throw AttackError("hybrid layout must be positive block sizes summing to the replica count");
    }
    const std::size_t successors_available = dag.out_degree(target);
    if (successors_available == 0) throw AttackError("replicas would be left without successors");
    if (successor_policy == SuccessorPolicy::Partitioned && successors_available < layout.back()) {
      throw AttackError("partitioned attack needs at least one direct successor per bottom replica");
    }
  }
};

struct AttackedGraph {
  ReferralDag graph;
  std::vector<NodeId> replicas;       // new ids, top block first
  std::vector<NodeId> original_to_new;  // target maps to its top replica
};

/// Builds G' from G by replacing the target with its replicas. Replicas take
/// the target's place in join order; every other node keeps its efforts and
/// its (remapped) predecessors.
inline AttackedGraph apply_attack(const ReferralDag& dag, const AttackSpec& spec) {
  spec.validate(dag);
  const auto layout = spec.blocks();
  const NodeId target = spec.target;

  AttackedGraph out;
  out.original_to_new.assign(dag.size(), 0);
  const auto successors = dag.direct_successors(target);

  std::vector<NodeId> preds;
  std::vector<NodeId> previous_block;
  std::vector<NodeId> bottom_block;
  for (NodeId x = 0; x < dag.size(); ++x) {
    preds.clear();
    if (x != target) {
      for (NodeId p : dag.direct_predecessors(x)) {
        if (p != target) {
          preds.push_back(out.original_to_new[p]);
          continue;
        }
        if (spec.successor_policy == SuccessorPolicy::Shared) {
          preds.insert(preds.end(), bottom_block.begin(), bottom_block.end());
        } else {
          const auto rank = static_cast<std::size_t>(
              std::find(successors.begin(), successors.end(), x) - successors.begin());
          preds.push_back(bottom_block[rank % bottom_block.size()]);
        }
      }
      out.original_to_new[x] = out.graph.add_node(dag.effort(x), preds);
      continue;
    }

    std::vector<NodeId> external;
    for (NodeId p : dag.direct_predecessors(target)) external.push_back(out.original_to_new[p]);
    std::size_t next_share = 0;
    for (std::size_t b = 0; b < layout.size(); ++b) {
      std::vector<NodeId> block;
      const auto& parents = b == 0 ? external : previous_block;
      for (std::size_t i = 0; i < layout[b]; ++i) {
        block.push_back(out.graph.add_node(spec.effort_split[next_share++], parents));
      }
      out.replicas.insert(out.replicas.end(), block.begin(), block.end());
      previous_block = std::move(block);
    }
    bottom_block = previous_block;
    out.original_to_new[x] = out.replicas.front();
  }
  return out;
}

struct AttackOutcome {
  double baseline_reward = 0.0;        // pi(v) in G
  std::vector<double> replica_rewards; // pi(r) in G'
  double replica_total = 0.0;
  double profit = 0.0;                 // replica_total - baseline_reward
  double baseline_credit = 0.0;
  double replica_credit_total = 0.0;
};

/// Runs the full mechanism on G and on G' with the same parameters.
inline AttackOutcome evaluate_attack(const ReferralDag& dag, const MechanismParams& params,
                                     const AttackSpec& spec) {
  const auto attacked = apply_attack(dag, spec);
  const auto base = run_mechanism(dag, params);
  const auto after = run_mechanism(attacked.graph, params);
  AttackOutcome o;
  o.baseline_reward = base.at(spec.target).pi_total;
  o.baseline_credit = base.at(spec.target).credits;
  for (NodeId r : attacked.replicas) {
    o.replica_rewards.push_back(after.at(r).pi_total);
    o.replica_total += after.at(r).pi_total;
    o.replica_credit_total += after.at(r).credits;
  }
  o.profit = o.replica_total - o.baseline_reward;
  return o;
}

/// Splits `total` into m positive shares whose left-to-right sum is exactly `total`.
inline std::vector<double> make_split(SplitStrategy strategy, double total, std::size_t m, Rng& rng) {
  if (m == 0 || !(total > 0.0)) throw AttackError("split needs m >= 1 and a positive total");
  std::vector<double> shares(m);
  if (strategy == SplitStrategy::Equal) {
    std::fill(shares.begin(), shares.end(), total / static_cast<double>(m));
  } else {
    std::exponential_distribution<double> gamma1(1.0);  // Dirichlet(1,...,1)
    double sum = 0.0;
    for (auto& s : shares) {
      s = gamma1(rng) + 1e-12;
      sum += s;
    }
    for (auto& s : shares) s = s / sum * total;
  }
  // Snap the leading shares to multiples of the spacing just below `total`;
  // every partial sum is then exact and the last share closes the gap.
  const double grid = total - std::nextafter(total, 0.0);
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    shares[i] = std::max(1.0, std::round(shares[i] / grid)) * grid;
    head += shares[i];
  }
  const double last = total - head;
  if (!(last > 0.0) || head + last != total) throw AttackError("could not split effort exactly");
  shares.back() = last;
  return shares;
}

/// Sizes of `blocks` blocks holding m replicas as evenly as possible, larger blocks first.
inline std::vector<std::size_t> even_layout(std::size_t m, std::size_t blocks) {
  blocks = std::clamp<std::size_t>(blocks, 1, m);
  std::vector<std::size_t> layout(blocks, m / blocks);
  for (std::size_t i = 0; i < m % blocks; ++i) ++layout[i];
  return layout;
}

/// A random valid attack of the given shape at `target`, or nullopt when the
/// target cannot be attacked that way (no effort, no successors, too few
/// successors to partition). Hybrid attacks use 2..m-1 blocks.
inline std::optional<AttackSpec> sample_attack(const ReferralDag& dag, NodeId target, AttackShape shape,
                                               SuccessorPolicy policy, std::size_t m, SplitStrategy split,
                                               Rng& rng) {
  if (m < 2 || !(dag.effort(target) > 0.0) || dag.out_degree(target) == 0) return std::nullopt;
  AttackSpec spec;
  spec.target = target;
  spec.shape = shape;
  spec.replica_count = m;
  spec.successor_policy = shape == AttackShape::Chain ? SuccessorPolicy::Shared : policy;
  if (shape == AttackShape::Hybrid) {
    std::uniform_int_distribution<std::size_t> blocks(2, std::max<std::size_t>(2, m - 1));
    spec.hybrid_layout = even_layout(m, blocks(rng));
  }
  const auto layout = spec.blocks();
  if (spec.successor_policy == SuccessorPolicy::Partitioned && dag.out_degree(target) < layout.back()) {
    return std::nullopt;
  }
  spec.effort_split = make_split(split, dag.effort(target), m, rng);
  return spec;
}

inline AttackShape parse_shape(std::string_view s) {
  for (auto x : {AttackShape::Chain, AttackShape::Parallel, AttackShape::Hybrid}) {
    if (to_string(x) == s) return x;
  }
  throw std::invalid_argument("unknown attack shape '" + std::string(s) + "'");
}

inline SuccessorPolicy parse_policy(std::string_view s) {
  for (auto x : {SuccessorPolicy::Shared, SuccessorPolicy::Partitioned}) {
    if (to_string(x) == s) return x;
  }
  throw std::invalid_argument("unknown successor policy '" + std::string(s) + "'");
}

inline SplitStrategy parse_split(std::string_view s) {
  for (auto x : {SplitStrategy::Equal, SplitStrategy::Dirichlet}) {
    if (to_string(x) == s) return x;
  }
  throw std::invalid_argument("unknown split strategy '" + std::string(s) + "'");
}

/// Picks an attack target, or nullopt when the graph has none.
using TargetSampler = std::function<std::optional<NodeId>(const ReferralDag&, Rng&)>;

/// Uniform over nodes with positive effort and at least `min_successors` direct successors.
inline TargetSampler uniform_target_sampler(std::size_t min_successors = 1) {
  return [min_successors](const ReferralDag& dag, Rng& rng) -> std::optional<NodeId> {
    std::vector<NodeId> eligible;
    for (NodeId v = 0; v < dag.size(); ++v) {
      if (dag.effort(v) > 0.0 && dag.out_degree(v) >= std::max<std::size_t>(1, min_successors)) eligible.push_back(v);
    }
    if (eligible.empty()) return std::nullopt;
    return eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
  };
}

struct AttackSweepOptions {
  std::vector<AttackShape> shapes{AttackShape::Chain, AttackShape::Parallel, AttackShape::Hybrid};
  SuccessorPolicy policy = SuccessorPolicy::Shared;
  SplitStrategy split = SplitStrategy::Equal;
  std::size_t max_false_identities = 10;  // m runs over 0..K; m false identities means m + 1 replicas
  std::vector<double> sigmas{0.4, 0.5, 0.6, 0.7};
  std::size_t repetitions = 20;
  std::size_t trial_offset = 0;  // added to trial numbers in the output
  std::uint64_t rng_seed = 0;
  unsigned threads = 1;
};

struct AttackSweepRow {
  AttackShape shape = AttackShape::Chain;
  std::size_t m = 0;
  double sigma = 0.0;
  SplitStrategy split = SplitStrategy::Equal;
  std::size_t trial = 0;
  double baseline = 0.0;
  double replica_total = 0.0;
  double normalized = 1.0;
};

struct AttackCell {
  AttackShape shape = AttackShape::Chain;
  double sigma = 0.0;
  std::size_t m = 0;
  std::size_t trials = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation of normalized reward
};

/**
 * Rewards of an attacker who creates m false identities, normalized by the
 * reward it earns honestly. Each trial draws one target and, for every shape,
 * sigma and m, splits its effort over m + 1 replicas; m = 0 is the honest
 * baseline. Hybrid attacks use two blocks.
 */
inline std::vector<AttackSweepRow> attack_sweep(const ReferralDag& dag, const TargetSampler& sampler,
                                                const MechanismParams& base_params,
                                                const AttackSweepOptions& opt) {
  const std::size_t per_trial = opt.shapes.size() * opt.sigmas.size() * (opt.max_false_identities + 1);
  std::vector<std::vector<AttackSweepRow>> by_trial(opt.repetitions);
  parallel_for(opt.repetitions, opt.threads, [&](std::size_t trial, unsigned) {
    Rng rng = make_rng(opt.rng_seed, {stream::attack, opt.trial_offset + trial});
    const auto target = sampler(dag, rng);
    if (!target) return;
    auto& rows = by_trial[trial];
    rows.reserve(per_trial);
    for (const double sigma : opt.sigmas) {
      const auto params = base_params.with_sigma(sigma);
      const auto honest = run_mechanism(dag, params);
      const double baseline = honest.at(*target).pi_total;
      for (const auto shape : opt.shapes) {
        for (std::size_t m = 0; m <= opt.max_false_identities; ++m) {
          AttackSweepRow row{shape, m, sigma, opt.split, opt.trial_offset + trial, baseline, baseline, 1.0};
          if (m > 0) {
            AttackSpec spec;
            spec.target = *target;
            spec.shape = shape;
            spec.replica_count = m + 1;
            spec.successor_policy = opt.policy;
            if (shape == AttackShape::Hybrid) spec.hybrid_layout = even_layout(m + 1, 2);
            if (opt.policy == SuccessorPolicy::Partitioned && shape != AttackShape::Chain &&
                dag.out_degree(*target) < spec.blocks().back()) {
              continue;
            }
            spec.effort_split = make_split(opt.split, dag.effort(*target), m + 1, rng);
            const auto attacked = apply_attack(dag, spec);
            const auto after = run_mechanism(attacked.graph, params);
            row.replica_total = 0.0;
            for (NodeId r : attacked.replicas) row.replica_total += after.at(r).pi_total;
            row.normalized = row.replica_total / baseline;
          }
          rows.push_back(row);
        }
      }
    }
  });
  std::vector<AttackSweepRow> out;
  for (auto& rows : by_trial) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

inline constexpr const char* kAttackCsvHeader = "shape,m,sigma,split,trial,baseline,replica_total,normalized";

inline void write_attack_csv(std::ostream& os, const std::vector<AttackSweepRow>& rows) {
  os << kAttackCsvHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(r.shape) << ',' << r.m << ',' << format_real(r.sigma) << ',' << to_string(r.split) << ','
       << r.trial << ',' << format_real(r.baseline) << ',' << format_real(r.replica_total) << ','
       << format_real(r.normalized) << '\n';
  }
}

/// Mean and sample standard deviation of the normalized reward per (shape, sigma, m).
inline std::vector<AttackCell> summarize_attack(const std::vector<AttackSweepRow>& rows) {
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0;
    double sq = 0.0;
  };
  std::map<std::tuple<int, double, std::size_t>, Acc> acc;
  for (const auto& r : rows) {
    auto& a = acc[{static_cast<int>(r.shape), r.sigma, r.m}];
    ++a.n;
    a.sum += r.normalized;
    a.sq += r.normalized * r.normalized;
  }
  std::vector<AttackCell> cells;
  for (const auto& [key, a] : acc) {
    AttackCell c;
    c.shape = static_cast<AttackShape>(std::get<0>(key));
    c.sigma = std::get<1>(key);
    c.m = std::get<2>(key);
    c.trials = a.n;
    c.mean = a.sum / static_cast<double>(a.n);
    c.stddev = a.n > 1 ? std::sqrt(std::max(0.0, (a.sq - a.sum * c.mean) / static_cast<double>(a.n - 1))) : 0.0;
    cells.push_back(c);
  }
  return cells;
}

}  // namespace mwc
