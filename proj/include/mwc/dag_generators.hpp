#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "mwc/referral_dag.hpp"
#include "mwc/rng.hpp"

namespace mwc {

struct RandomDagOptions {
  std::size_t nodes = 10;
  double edge_probability = 0.3;  // chance that an earlier node is a direct predecessor
  double zero_effort_fraction = 0.0;
  double min_effort = 0.0;        // efforts drawn from (min_effort, max_effort]
  double max_effort = 1.0;
};

/// Erdos-Renyi style referral DAG: every earlier node is a predecessor with
/// the given probability.
inline ReferralDag random_referral_dag(Rng& rng, const RandomDagOptions& opt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ReferralDag dag;
  std::vector<NodeId> preds;
  for (std::size_t i = 0; i < opt.nodes; ++i) {
    preds.clear();
    for (NodeId j = 0; j < i; ++j) {
      if (unit(rng) < opt.edge_probability) preds.push_back(j);
    }
    double t = 0.0;
    if (!(unit(rng) < opt.zero_effort_fraction)) {
      // 1 - U[0,1) lies in (0,1]
      t = opt.min_effort + (opt.max_effort - opt.min_effort) * (1.0 - unit(rng));
    }
    dag.add_node(t, preds);
  }
  return dag;
}

/// Sparse referral DAG: node i draws Poisson(mean_in_degree) distinct
/// predecessors uniformly among earlier nodes, so the average total degree
/// is about twice mean_in_degree. Efforts are uniform on (0,1].
inline ReferralDag sparse_referral_dag(Rng& rng, std::size_t nodes, double mean_in_degree) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<std::size_t> degree(mean_in_degree);
  ReferralDag dag;
  std::vector<NodeId> preds;
  for (std::size_t i = 0; i < nodes; ++i) {
    preds.clear();
    const std::size_t k = std::min(i, degree(rng));
    std::uniform_int_distribution<NodeId> pick(0, i == 0 ? 0 : static_cast<NodeId>(i - 1));
    while (preds.size() < k) {
      NodeId p = pick(rng);
      if (std::find(preds.begin(), preds.end(), p) == preds.end()) preds.push_back(p);
    }
    std::sort(preds.begin(), preds.end());
    dag.add_node(1.0 - unit(rng), preds);
  }
  return dag;
}

}  // namespace mwc
