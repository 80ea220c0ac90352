#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwc/parallel.hpp"
#include "mwc/referral_dag.hpp"

namespace mwc {

/**
 * Parameters of the multi-winner contests mechanism.
 *
 * lambda discounts credit along referral paths, eta scales the effort
 * allowance, mu is the task reward rate, phi the diffusion prize rate and
 * sigma the exponent of the ratio-form contest success function.
 */
struct MechanismParams {
  double lambda = 0.5;
  double eta = 0.25;
  double mu = 0.9;
  double phi = 0.1;
  double sigma = 0.5;

  double budget_rate() const noexcept { return mu + phi; }

  void validate() const {
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0,1)");
    if (!(eta >= lambda / 2.0)) throw std::invalid_argument("eta must be at least lambda/2");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be positive");
    if (!(phi > 0.0) || !std::isfinite(phi)) throw std::invalid_argument("phi must be positive");
    if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("sigma must lie in [0,1]");
  }

  MechanismParams with_sigma(double s) const {
    MechanismParams p = *this;
    p.sigma = s;
    return p;
  }
};

/// b^sigma for a positive credit b, with b^0 = 1.
inline double contest_weight(double credit, double sigma) {
  return sigma == 0.0 ? 1.0 : std::pow(credit, sigma);
}

/// Ratio-form contest success function over positive credits.
inline std::vector<double> contest_success(std::span<const double> credits, double sigma) {
  std::vector<double> p;
  p.reserve(credits.size());
  double sum = 0.0;
  for (double b : credits) {
    p.push_back(contest_weight(b, sigma));
    sum += p.back();
  }
  for (double& x : p) x /= sum;
  return p;
}

/**
 * Virtual credits, maintained incrementally as players join.
 *
 * When v joins with t_v > 0 it receives the allowance eta * t_v^2 and every
 * ancestor x with t_x > 0 gains t_x * t_v * g(x), g being the discounted,
 * weight-shared path sum from x to v.
 */
class CreditLedger {
 public:
  std::size_t size() const noexcept { return credits_.size(); }
  double credit(NodeId v) const { return credits_.at(v); }
  const std::vector<double>& credits() const noexcept { return credits_; }

  void on_join(const ReferralDag& dag, NodeId v, const MechanismParams& params) {
    if (v != credits_.size() || v >= dag.size()) {
      throw std::logic_error("on_join expects the next node in join order (" +
                             std::to_string(credits_.size()) + "), got " + std::to_string(v));
    }
    const double tv = dag.effort(v);
    if (tv <= 0.0) {
      credits_.push_back(0.0);
      return;
    }
    credits_.push_back(params.eta * tv * tv);
    aggregator_.run(dag, v, params.lambda, [&](NodeId x, double g) {
      const double tx = dag.effort(x);
      if (tx > 0.0) credits_[x] += tx * tv * g;
    });
  }

 private:
  std::vector<double> credits_;
  AncestorAggregator aggregator_;
};

inline void on_join(const ReferralDag& dag, CreditLedger& ledger, NodeId v,
                    const MechanismParams& params) {
  ledger.on_join(dag, v, params);
}

/// Replays every join in order.
inline CreditLedger build_ledger(const ReferralDag& dag, const MechanismParams& params) {
  CreditLedger ledger;
  for (NodeId v = 0; v < dag.size(); ++v) ledger.on_join(dag, v, params);
  return ledger;
}

/// Credits straight from the closed form by enumerating every path. Test oracle.
inline std::vector<double> compute_credits_bruteforce(const ReferralDag& dag,
                                                      const MechanismParams& params,
                                                      std::size_t node_limit = kBruteForceNodeLimit) {
  if (dag.size() > node_limit) throw GraphError("brute-force credits limited to small graphs");
  std::vector<double> credits(dag.size(), 0.0);
  for (NodeId v = 0; v < dag.size(); ++v) {
    const double tv = dag.effort(v);
    if (tv <= 0.0) continue;
    double sum = 0.0;
    for (NodeId u = 0; u < dag.size(); ++u) {
      if (u == v) continue;
      for (const auto& p : enumerate_paths_bruteforce(dag, v, u, node_limit)) {
        sum += dag.effort(u) * p.weight * std::pow(params.lambda, static_cast<double>(p.length));
      }
    }
    credits[v] = params.eta * tv * tv + tv * sum;
  }
  return credits;
}

struct ContestSummary {
  std::size_t contestants = 0;    // nodes of the rooted subgraph with t > 0
  double weight_sum = 0.0;        // sum of b^sigma over contestants
  double attributed_effort = 0.0; // sum of t_u * local_in_degree(u) / in_degree(u)
};

/// Scratch for evaluating the contest held in one rooted subgraph.
class ContestEvaluator {
 public:
  // weight(u) must return b_u^sigma for contestants and 0 otherwise.
  template <class Weight>
  ContestSummary evaluate(const ReferralDag& dag, NodeId v, Weight&& weight) {
    dag.check(v);
    const std::size_t n = dag.size();
    marks_.reset(n);
    if (local_in_.size() < n) local_in_.resize(n);
    order_.clear();
    stack_.assign(1, v);
    marks_.mark(v);
    while (!stack_.empty()) {
      const NodeId x = stack_.back();
      stack_.pop_back();
      for (NodeId y : dag.direct_successors(x)) {
        if (marks_.insert(y)) {
          local_in_[y] = 0;
          order_.push_back(y);
          stack_.push_back(y);
        }
        ++local_in_[y];
      }
    }
    ContestSummary s;
    if (dag.effort(v) > 0.0) {
      s.contestants = 1;
      s.weight_sum = weight(v);
    }
    for (NodeId u : order_) {
      const double tu = dag.effort(u);
      if (tu <= 0.0) continue;
      ++s.contestants;
      s.weight_sum += weight(u);
      s.attributed_effort += tu * static_cast<double>(local_in_[u]) / static_cast<double>(dag.in_degree(u));
    }
    return s;
  }

 private:
  VisitMarks marks_;
  std::vector<std::uint32_t> local_in_;
  std::vector<NodeId> order_;
  std::vector<NodeId> stack_;
};

/// Nodes of the subgraph rooted at v that exerted positive effort, ascending.
inline std::vector<NodeId> contestants(const ReferralDag& dag, NodeId v) {
  std::vector<NodeId> out;
  if (dag.effort(v) > 0.0) out.push_back(v);
  for (NodeId u : successors(dag, v)) {
    if (dag.effort(u) > 0.0) out.push_back(u);
  }
  return out;
}

inline double win_probability(const ReferralDag& dag, const CreditLedger& ledger, NodeId v,
                              const MechanismParams& params) {
  if (ledger.size() != dag.size()) throw std::invalid_argument("ledger does not match graph");
  if (!(dag.effort(v) > 0.0)) throw std::domain_error("win probability undefined for zero effort");
  ContestEvaluator eval;
  auto weight = [&](NodeId u) { return contest_weight(ledger.credit(u), params.sigma); };
  const auto s = eval.evaluate(dag, v, weight);
  return weight(v) / s.weight_sum;
}

/// phi times the in-subgraph share of every successor's effort.
inline double prize_pool(const ReferralDag& dag, NodeId v, const MechanismParams& params) {
  ContestEvaluator eval;
  return params.phi * eval.evaluate(dag, v, [](NodeId) { return 0.0; }).attributed_effort;
}

struct NodeReward {
  NodeId node = 0;
  double task_effort = 0.0;
  double credits = 0.0;
  double win_prob = 0.0;
  double pool = 0.0;
  double pi_t = 0.0;
  double pi_d = 0.0;
  double pi_total = 0.0;
};

struct RewardTotals {
  double effort = 0.0;
  double task_reward = 0.0;
  double diffusion_reward = 0.0;
  double total_reward = 0.0;
  std::size_t participants = 0;
};

struct RewardReport {
  MechanismParams params;
  std::vector<NodeReward> nodes;  // indexed by node id
  RewardTotals totals;

  const NodeReward& at(NodeId v) const { return nodes.at(v); }

  /// Total payout over the budget (mu + phi) * total effort; 0 when nothing was exerted.
  double payout_ratio() const {
    const double cap = params.budget_rate() * totals.effort;
    return cap > 0.0 ? totals.total_reward / cap : 0.0;
  }
};

/**
 * Settles every contest on a frozen graph and ledger.
 *
 * Each eligible node (t_v > 0) is paid mu * t_v plus its win probability in
 * the contest over its rooted subgraph times that subgraph's prize pool.
 * Contests are independent, so they are spread over `threads` workers.
 */
inline RewardReport compute_rewards(const ReferralDag& dag, const CreditLedger& ledger,
                                    const MechanismParams& params, unsigned threads = 1) {
  if (ledger.size() != dag.size()) throw std::invalid_argument("ledger does not match graph");
  const std::size_t n = dag.size();
  std::vector<double> weights(n, 0.0);
  for (NodeId u = 0; u < n; ++u) {
    if (dag.effort(u) > 0.0) weights[u] = contest_weight(ledger.credit(u), params.sigma);
  }

  RewardReport report;
  report.params = params;
  report.nodes.resize(n);
  std::vector<ContestEvaluator> evaluators(std::max(1u, threads));
  parallel_for(n, threads, [&](std::size_t i, unsigned worker) {
    const auto v = static_cast<NodeId>(i);
    NodeReward& row = report.nodes[i];
    row.node = v;
    row.task_effort = dag.effort(v);
    row.credits = ledger.credit(v);
    if (!(row.task_effort > 0.0)) return;
    const auto s = evaluators[worker].evaluate(dag, v, [&](NodeId u) { return weights[u]; });
    row.win_prob = weights[v] / s.weight_sum;
    row.pool = params.phi * s.attributed_effort;
    row.pi_t = params.mu * row.task_effort;
    row.pi_d = row.pool > 0.0 ? row.win_prob * row.pool : 0.0;
    row.pi_total = row.pi_t + row.pi_d;
  });

  for (const auto& row : report.nodes) {
    report.totals.effort += row.task_effort;
    report.totals.task_reward += row.pi_t;
    report.totals.diffusion_reward += row.pi_d;
    report.totals.total_reward += row.pi_total;
    if (row.task_effort > 0.0) ++report.totals.participants;
  }
  return report;
}

/// Ledger plus settlement in one call.
inline RewardReport run_mechanism(const ReferralDag& dag, const MechanismParams& params,
                                  unsigned threads = 1) {
  return compute_rewards(dag, build_ledger(dag, params), params, threads);
}

/// U(v) = pi(v) - delta_v * t_v.
inline double utility(const RewardReport& report, NodeId v, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("cost coefficient must be positive");
  const auto& row = report.at(v);
  return row.pi_total - delta * row.task_effort;
}

}  // namespace mwc
