#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mwc/dag_generators.hpp"
#include "mwc/dag_io.hpp"
#include "mwc/referral_dag.hpp"
#include "support/fixtures.hpp"

using namespace mwc;
using Catch::Approx;
using Catch::Matchers::WithinRel;

TEST_CASE("add_node assigns join order and derives in-edge weights", "[dag]") {
  ReferralDag dag;
  CHECK(dag.add_node(1.0) == 0);
  CHECK(dag.in_degree(0) == 0);

  const NodeId a = 0;
  const NodeId b = dag.add_node(1.0, {a});
  const NodeId c = dag.add_node(1.0, {a, b});
  CHECK(dag.edge_weight(a, c) == 0.5);
  CHECK(dag.edge_weight(b, c) == 0.5);
  CHECK(dag.edge_weight(a, b) == 1.0);
  CHECK(dag.edge_count() == 3);
}

TEST_CASE("add_node rejects bad input", "[dag]") {
  ReferralDag dag;
  dag.add_node(1.0);
  CHECK_THROWS_AS(dag.add_node(1.0, {5}), GraphError);
  CHECK_THROWS_AS(dag.add_node(1.0, {0, 0}), GraphError);
  CHECK_THROWS_AS(dag.add_node(-0.1), GraphError);
  CHECK_THROWS_AS(dag.add_node(std::nan("")), GraphError);
  CHECK(dag.size() == 1);
  CHECK_THROWS_AS(dag.edge_weight(0, 0), GraphError);
  CHECK_THROWS_AS(successors(dag, 7), GraphError);
}

TEST_CASE("successors and predecessors", "[dag]") {
  auto chain = fixtures::chain(1.0, 1.0, 1.0);
  CHECK(successors(chain, 0) == std::vector<NodeId>{1, 2});
  CHECK(successors(chain, 2).empty());
  CHECK(predecessors(chain, 2) == std::vector<NodeId>{0, 1});
  CHECK(predecessors(chain, 0).empty());

  auto diamond = fixtures::diamond();
  CHECK(successors(diamond, 0) == std::vector<NodeId>{1, 2, 3});
  CHECK(predecessors(diamond, 3) == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("rooted_subgraph", "[dag]") {
  auto diamond = fixtures::diamond();
  auto sink = rooted_subgraph(diamond, 3);
  CHECK(sink.nodes == std::vector<NodeId>{3});
  CHECK(sink.edges.empty());

  auto at_b = rooted_subgraph(diamond, 1);
  CHECK(at_b.nodes == std::vector<NodeId>{1, 3});
  REQUIRE(at_b.edges.size() == 1);
  CHECK(at_b.edges[0] == std::pair<NodeId, NodeId>{1, 3});
  CHECK(at_b.in_degree_within(3) == 1);
  CHECK(diamond.in_degree(3) == 2);

  auto chain = fixtures::chain(1.0, 1.0, 1.0);
  auto whole = rooted_subgraph(chain, 0);
  CHECK(whole.nodes == std::vector<NodeId>{0, 1, 2});
  CHECK(whole.edges.size() == 2);
}

TEST_CASE("ancestor_path_aggregates on the worked examples", "[dag][dp]") {
  auto chain = fixtures::chain(1.0, 1.0, 1.0);
  auto g = ancestor_path_aggregates(chain, 2, 0.5);
  REQUIRE(g.size() == 2);
  CHECK(g.at(1) == 0.5);
  CHECK(g.at(0) == 0.25);

  auto diamond = fixtures::diamond();
  auto gd = ancestor_path_aggregates(diamond, 3, 0.5);
  CHECK(gd.at(1) == 0.25);
  CHECK(gd.at(2) == 0.25);
  CHECK(gd.at(0) == 0.25);

  // Node 1 cannot reach node 2 in the diamond.
  auto g2 = ancestor_path_aggregates(diamond, 2, 0.5);
  CHECK(g2.count(1) == 0);
  CHECK(g2.size() == 1);
}

TEST_CASE("enumerate_paths_bruteforce", "[dag][oracle]") {
  auto chain = fixtures::chain(1.0, 1.0, 1.0);
  auto p = enumerate_paths_bruteforce(chain, 0, 2);
  REQUIRE(p.size() == 1);
  CHECK(p[0].weight == 1.0);
  CHECK(p[0].length == 2);
  CHECK(enumerate_paths_bruteforce(chain, 2, 0).empty());

  auto diamond = fixtures::diamond();
  auto pd = enumerate_paths_bruteforce(diamond, 0, 3);
  REQUIRE(pd.size() == 2);
  for (const auto& path : pd) {
    CHECK(path.weight == 0.5);
    CHECK(path.length == 2);
  }

  Rng rng(1);
  auto big = random_referral_dag(rng, {.nodes = 16});
  CHECK_THROWS_AS(enumerate_paths_bruteforce(big, 0, 15), GraphError);
}

TEST_CASE("DP matches exhaustive path enumeration on random DAGs", "[dag][dp][property]") {
  Rng rng(derive_seed(2024, {1}));
  std::uniform_real_distribution<double> lam(0.05, 0.95);
  std::uniform_real_distribution<double> density(0.1, 0.7);
  std::uniform_int_distribution<std::size_t> size(1, 15);
  for (int trial = 0; trial < 200; ++trial) {
    auto dag = random_referral_dag(rng, {.nodes = size(rng), .edge_probability = density(rng)});
    const double lambda = lam(rng);
    for (NodeId v = 0; v < dag.size(); ++v) {
      auto g = ancestor_path_aggregates(dag, v, lambda);
      for (NodeId x = 0; x < dag.size(); ++x) {
        double oracle = 0.0;
        for (const auto& p : enumerate_paths_bruteforce(dag, x, v)) {
          oracle += p.weight * std::pow(lambda, static_cast<double>(p.length));
        }
        auto it = g.find(x);
        if (oracle == 0.0) {
          CHECK(it == g.end());
        } else {
          REQUIRE(it != g.end());
          CHECK_THAT(it->second, WithinRel(oracle, 1e-9));
        }
      }
    }
  }
}

TEST_CASE("graph invariants hold on random DAGs", "[dag][property]") {
  Rng rng(derive_seed(2024, {2}));
  for (int trial = 0; trial < 50; ++trial) {
    auto dag = random_referral_dag(rng, {.nodes = 30, .edge_probability = 0.2});
    for (NodeId u = 0; u < dag.size(); ++u) {
      if (dag.in_degree(u) > 0) {
        double sum = 0.0;
        for (NodeId p : dag.direct_predecessors(u)) {
          CHECK(p < u);
          sum += dag.edge_weight(p, u);
        }
        CHECK_THAT(sum, WithinRel(1.0, 1e-12));
      }
    }
    for (NodeId v = 0; v < dag.size(); v += 5) {
      auto view = rooted_subgraph(dag, v);
      for (NodeId u : view.nodes) CHECK(view.in_degree_within(u) <= dag.in_degree(u));
      CHECK(view.in_degree_within(v) == 0);
    }
  }
}

TEST_CASE("text format round-trips bit-exactly", "[dag][io]") {
  Rng rng(derive_seed(2024, {3}));
  for (int trial = 0; trial < 20; ++trial) {
    auto dag = random_referral_dag(rng, {.nodes = 40, .edge_probability = 0.15, .zero_effort_fraction = 0.2});
    std::stringstream ss;
    write_dag(ss, dag);
    const std::string first = ss.str();
    auto back = read_dag(ss);
    REQUIRE(back.size() == dag.size());
    for (NodeId v = 0; v < dag.size(); ++v) {
      CHECK(back.effort(v) == dag.effort(v));
      auto a = dag.direct_predecessors(v);
      auto b = back.direct_predecessors(v);
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    std::stringstream again;
    write_dag(again, back);
    CHECK(again.str() == first);
  }
}

TEST_CASE("reader reports malformed input", "[dag][io]") {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return read_dag(is);
  };
  CHECK_THROWS_AS(parse("N 0 1\n"), FormatError);
  CHECK_THROWS_AS(parse("# mwc-dag v1\nN 1 1\n"), FormatError);
  CHECK_THROWS_AS(parse("# mwc-dag v1\nN 0 1\nN 1 1\nE 1 0\n"), FormatError);
  CHECK_THROWS_AS(parse("# mwc-dag v1\nN 0 x\n"), FormatError);
  CHECK_THROWS_AS(parse("# mwc-dag v1\nN 0 1\nN 1 1\nE 0 1\nE 0 1\n"), FormatError);
  CHECK(parse("# mwc-dag v1\n").empty());
}
