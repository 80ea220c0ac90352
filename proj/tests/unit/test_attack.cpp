#include <catch_amalgamated.hpp>

#include <numeric>

#include "mwc/attack.hpp"
#include "mwc/dag_generators.hpp"
#include "support/collapse.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace mwc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MechanismParams default_params(double sigma = 1.0) {
  return MechanismParams{.lambda = 0.5, .eta = 0.25, .mu = 0.9, .phi = 0.1, .sigma = sigma};
}

AttackSpec spec_for(NodeId target, AttackShape shape, std::vector<double> split,
                    SuccessorPolicy policy = SuccessorPolicy::Shared) {
  AttackSpec s;
  s.target = target;
  s.shape = shape;
  s.replica_count = split.size();
  s.effort_split = std::move(split);
  s.successor_policy = policy;
  return s;
}

std::vector<NodeId> preds_of(const ReferralDag& g, NodeId v) {
  auto p = g.direct_predecessors(v);
  return {p.begin(), p.end()};
}

}  // namespace

TEST_CASE("chain attack on a -> v -> c", "[attack]") {
  const auto dag = fixtures::chain(1.0, 1.0, 1.0);
  const auto out = apply_attack(dag, spec_for(1, AttackShape::Chain, {0.5, 0.5}));
  const auto& g = out.graph;
  REQUIRE(g.size() == 4);
  REQUIRE(out.replicas == std::vector<NodeId>{1, 2});
  CHECK(preds_of(g, 1) == std::vector<NodeId>{0});
  CHECK(preds_of(g, 2) == std::vector<NodeId>{1});
  CHECK(preds_of(g, 3) == std::vector<NodeId>{2});
  CHECK(g.effort(1) == 0.5);
  CHECK(g.effort(2) == 0.5);
  CHECK(out.original_to_new == std::vector<NodeId>{0, 1, 3});
}

TEST_CASE("parallel shared attack halves the successor weight", "[attack]") {
  ReferralDag dag;
  dag.add_node(1.0);
  dag.add_node(1.0, {0});
  dag.add_node(1.0, {1});
  const auto out = apply_attack(dag, spec_for(1, AttackShape::Parallel, {0.5, 0.5}));
  const auto& g = out.graph;
  CHECK(preds_of(g, 1) == std::vector<NodeId>{0});
  CHECK(preds_of(g, 2) == std::vector<NodeId>{0});
  CHECK(preds_of(g, 3) == std::vector<NodeId>{1, 2});
  CHECK(g.edge_weight(1, 3) == 0.5);
  CHECK(g.edge_weight(2, 3) == 0.5);
}

TEST_CASE("parallel shared credit example", "[attack]") {
  ReferralDag dag;
  dag.add_node(1.0);
  dag.add_node(1.0, {0});
  const auto p = default_params();
  CHECK_THAT(build_ledger(dag, p).credit(0), WithinRel(0.75, 1e-12));
  const auto out = apply_attack(dag, spec_for(0, AttackShape::Parallel, {0.5, 0.5}));
  const auto ledger = build_ledger(out.graph, p);
  const auto brute = compute_credits_bruteforce(out.graph, p);
  for (NodeId r : out.replicas) {
    CHECK_THAT(ledger.credit(r), WithinRel(0.1875, 1e-12));
    CHECK_THAT(brute[r], WithinRel(0.1875, 1e-12));
  }
  CHECK(ledger.credit(0) + ledger.credit(1) < 0.75);
}

TEST_CASE("partitioned attack keeps successor in-degrees", "[attack]") {
  ReferralDag dag;
  dag.add_node(1.0);
  dag.add_node(1.0, {0});
  dag.add_node(1.0, {0});
  dag.add_node(1.0, {0, 1});
  const auto out = apply_attack(dag, spec_for(0, AttackShape::Parallel, {0.25, 0.75},
                                               SuccessorPolicy::Partitioned));
  const auto& g = out.graph;
  REQUIRE(g.size() == 5);
  for (NodeId u : dag.direct_successors(0)) {
    CHECK(g.in_degree(out.original_to_new[u]) == dag.in_degree(u));
  }
  CHECK(g.out_degree(0) >= 1);
  CHECK(g.out_degree(1) >= 1);
}

TEST_CASE("hybrid attack builds a chain of blocks", "[attack]") {
  ReferralDag dag;
  dag.add_node(1.0);
  dag.add_node(1.0, {0});
  dag.add_node(1.0, {1});
  auto spec = spec_for(1, AttackShape::Hybrid, {0.25, 0.25, 0.25, 0.25});
  spec.hybrid_layout = {1, 3};
  const auto out = apply_attack(dag, spec);
  const auto& g = out.graph;
  CHECK(preds_of(g, 1) == std::vector<NodeId>{0});
  for (NodeId r : {2u, 3u, 4u}) CHECK(preds_of(g, r) == std::vector<NodeId>{1});
  CHECK(preds_of(g, 5) == (std::vector<NodeId>{2, 3, 4}));
}

TEST_CASE("invalid attacks are rejected", "[attack]") {
  const auto dag = fixtures::chain(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(1, AttackShape::Chain, {1.0})), AttackError);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(1, AttackShape::Chain, {0.5, 0.4})), AttackError);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(1, AttackShape::Chain, {1.0, 0.0})), AttackError);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(2, AttackShape::Chain, {0.5, 0.5})), AttackError);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(9, AttackShape::Chain, {0.5, 0.5})), AttackError);
  CHECK_THROWS_AS(apply_attack(dag, spec_for(1, AttackShape::Parallel, {0.5, 0.5}, SuccessorPolicy::Partitioned)),
                  AttackError);
  auto hybrid = spec_for(1, AttackShape::Hybrid, {0.5, 0.25, 0.25});
  hybrid.hybrid_layout = {1, 1};
  CHECK_THROWS_AS(apply_attack(dag, hybrid), AttackError);
  auto idle = fixtures::chain(1.0, 0.0, 1.0);
  CHECK_THROWS_AS(apply_attack(idle, spec_for(1, AttackShape::Chain, {0.5, 0.5})), AttackError);
}

TEST_CASE("make_split conserves effort exactly", "[attack]") {
  Rng rng = make_rng(11, {stream::attack});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double total = 1.0 - unit(rng);
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 9);
    for (auto strategy : {SplitStrategy::Equal, SplitStrategy::Dirichlet}) {
      const auto split = make_split(strategy, total, m, rng);
      REQUIRE(split.size() == m);
      double sum = 0.0;
      for (double x : split) {
        REQUIRE(x > 0.0);
        sum += x;
      }
      REQUIRE(sum == total);
    }
  }
}

TEST_CASE("make_split is deterministic", "[attack]") {
  Rng a = make_rng(5, {stream::attack});
  Rng b = make_rng(5, {stream::attack});
  CHECK(make_split(SplitStrategy::Dirichlet, 0.7, 6, a) == make_split(SplitStrategy::Dirichlet, 0.7, 6, b));
}

TEST_CASE("even_layout", "[attack]") {
  CHECK(even_layout(5, 2) == std::vector<std::size_t>{3, 2});
  CHECK(even_layout(4, 4) == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(even_layout(3, 9) == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("random attacks: invariants", "[attack][property]") {
  Rng rng = make_rng(2024, {stream::property});
  std::uniform_int_distribution<std::size_t> size(3, 14);
  std::uniform_int_distribution<std::size_t> replicas(2, 8);
  std::uniform_real_distribution<double> sigma(0.0, 1.0);
  const AttackShape shapes[] = {AttackShape::Chain, AttackShape::Parallel, AttackShape::Hybrid};
  int attacks = 0;
  for (int trial = 0; trial < 600; ++trial) {
    RandomDagOptions opt;
    opt.nodes = size(rng);
    opt.edge_probability = 0.35;
    opt.zero_effort_fraction = 0.1;
    const auto dag = random_referral_dag(rng, opt);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(dag.size() - 1));
    const auto shape = shapes[trial % 3];
    const auto policy = (trial / 3) % 2 == 0 ? SuccessorPolicy::Shared : SuccessorPolicy::Partitioned;
    const auto split = trial % 2 == 0 ? SplitStrategy::Equal : SplitStrategy::Dirichlet;
    const auto spec = sample_attack(dag, pick(rng), shape, policy, replicas(rng), split, rng);
    if (!spec) continue;
    ++attacks;
    const auto out = apply_attack(dag, *spec);
    const auto& g = out.graph;
    const NodeId v = spec->target;

    double replica_effort = 0.0;
    for (NodeId r : out.replicas) {
      REQUIRE(g.out_degree(r) >= 1);
      replica_effort += g.effort(r);
    }
    REQUIRE(replica_effort == dag.effort(v));
    REQUIRE(collapse::same_graph(collapse::collapse_replicas(out), dag));

    if (spec->shape == AttackShape::Chain || spec->successor_policy == SuccessorPolicy::Partitioned) {
      for (NodeId u : dag.direct_successors(v)) {
        const auto before = rooted_subgraph(dag, u);
        const auto after = rooted_subgraph(g, out.original_to_new[u]);
        REQUIRE(before.nodes.size() == after.nodes.size());
        for (std::size_t i = 0; i < before.nodes.size(); ++i) {
          REQUIRE(out.original_to_new[before.nodes[i]] == after.nodes[i]);
          REQUIRE(dag.in_degree(before.nodes[i]) == g.in_degree(after.nodes[i]));
        }
      }
    }

    const auto p = default_params(sigma(rng));
    const auto base = run_mechanism(dag, p);
    const auto attacked = run_mechanism(g, p);
    for (NodeId x = 0; x < dag.size(); ++x) {
      if (x == v) continue;
      REQUIRE(attacked.at(out.original_to_new[x]).pi_t == base.at(x).pi_t);
    }
  }
  CHECK(attacks > 250);
}

TEST_CASE("replicas always hold fewer credits than the target", "[attack][property]") {
  // The credit allowance is superadditive and shared paths only lose weight,
  // so splitting an identity strictly lowers total credit.
  Rng rng = make_rng(77, {stream::property});
  std::uniform_int_distribution<std::size_t> size(3, 14);
  std::uniform_int_distribution<std::size_t> replicas(2, 8);
  const AttackShape shapes[] = {AttackShape::Chain, AttackShape::Parallel, AttackShape::Hybrid};
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    RandomDagOptions opt;
    opt.nodes = size(rng);
    opt.edge_probability = 0.4;
    const auto dag = random_referral_dag(rng, opt);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(dag.size() - 1));
    const auto spec = sample_attack(dag, pick(rng), shapes[trial % 3],
                                    trial % 2 ? SuccessorPolicy::Partitioned : SuccessorPolicy::Shared,
                                    replicas(rng), SplitStrategy::Dirichlet, rng);
    if (!spec) continue;
    ++checked;
    const auto o = evaluate_attack(dag, default_params(0.5), *spec);
    REQUIRE(o.replica_credit_total < o.baseline_credit);
  }
  CHECK(checked > 500);
}

TEST_CASE("evaluate_attack agrees with the oracle", "[attack]") {
  const auto dag = fixtures::chain(1.0, 1.0, 1.0);
  const auto spec = spec_for(1, AttackShape::Chain, {0.5, 0.5});
  const auto p = default_params(1.0);
  const auto o = evaluate_attack(dag, p, spec);
  const auto before = oracle::rewards(dag, p);
  const auto after = oracle::rewards(apply_attack(dag, spec).graph, p);
  CHECK_THAT(o.baseline_reward, WithinRel(before.total[1], 1e-12));
  CHECK_THAT(o.replica_total, WithinRel(after.total[1] + after.total[2], 1e-12));
  CHECK_THAT(o.profit, WithinAbs(o.replica_total - o.baseline_reward, 0.0));
  // Task rewards are conserved; only the diffusion part can move.
  CHECK_THAT(o.baseline_reward - before.pi_d[1], WithinRel(0.9, 1e-12));
}
