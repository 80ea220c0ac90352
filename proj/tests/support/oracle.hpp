#pragma once

// Direct evaluation of the reward formulas from explicit node sets. Shares no
// code with the ledger or the contest evaluator.

#include <cmath>
#include <vector>

#include "mwc/mechanism.hpp"
#include "mwc/referral_dag.hpp"

namespace oracle {

struct Rewards {
  std::vector<double> credits;
  std::vector<double> pi_t;
  std::vector<double> pi_d;
  std::vector<double> total;
};

inline Rewards rewards(const mwc::ReferralDag& dag, const mwc::MechanismParams& p) {
  Rewards r;
  const auto n = dag.size();
  r.credits = mwc::compute_credits_bruteforce(dag, p);
  r.pi_t.assign(n, 0.0);
  r.pi_d.assign(n, 0.0);
  r.total.assign(n, 0.0);
  for (mwc::NodeId v = 0; v < n; ++v) {
    if (!(dag.effort(v) > 0.0)) continue;
    const auto view = mwc::rooted_subgraph(dag, v);
    double denom = 0.0;
    double attributed = 0.0;
    for (std::size_t i = 0; i < view.nodes.size(); ++i) {
      const auto u = view.nodes[i];
      if (dag.effort(u) > 0.0) denom += p.sigma == 0.0 ? 1.0 : std::pow(r.credits[u], p.sigma);
      if (u != v) {
        attributed += dag.effort(u) * static_cast<double>(view.local_in_degree[i]) /
                      static_cast<double>(dag.in_degree(u));
      }
    }
    const double mine = p.sigma == 0.0 ? 1.0 : std::pow(r.credits[v], p.sigma);
    r.pi_t[v] = p.mu * dag.effort(v);
    r.pi_d[v] = mine / denom * p.phi * attributed;
    r.total[v] = r.pi_t[v] + r.pi_d[v];
  }
  return r;
}

}  // namespace oracle
