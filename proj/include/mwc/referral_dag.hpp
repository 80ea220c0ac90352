#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mwc {

/// Dense node index. Ids are assigned in join order, so the id doubles as
/// the join index.
using NodeId = std::uint32_t;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PathRecord {
  double weight;       // product of edge weights along the path
  std::size_t length;  // number of edges
};

/**
 * Append-only referral DAG.
 *
 * A node's direct predecessors are fixed when it joins; every edge therefore
 * points from a lower id to a higher id. The weight of an edge v->u is
 * 1 / in_degree(u), so the in-edge weights of every non-seed node sum to 1.
 */
class ReferralDag {
 public:
  ReferralDag() = default;

  NodeId add_node(double task_effort, std::span<const NodeId> direct_predecessors) {
    if (!(task_effort >= 0.0) || !std::isfinite(task_effort)) {
      throw GraphError("task effort must be a finite nonnegative number");
    }
    const auto id = static_cast<NodeId>(efforts_.size());
    std::vector<NodeId> preds(direct_predecessors.begin(), direct_predecessors.end());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] >= id) {
        throw GraphError("unknown predecessor id " + std::to_string(preds[i]));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (preds[j] == preds[i]) {
          throw GraphError("duplicate predecessor id " + std::to_string(preds[i]));
        }
      }
    }
    for (NodeId p : preds) out_[p].push_back(id);
    edge_count_ += preds.size();
    efforts_.push_back(task_effort);
    in_.push_back(std::move(preds));
    out_.emplace_back();
    return id;
  }

  NodeId add_node(double task_effort, std::initializer_list<NodeId> direct_predecessors = {}) {
    return add_node(task_effort, std::span<const NodeId>(direct_predecessors.begin(),
                                                         direct_predecessors.size()));
  }

  std::size_t size() const noexcept { return efforts_.size(); }
  bool empty() const noexcept { return efforts_.empty(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  bool contains(NodeId v) const noexcept { return v < efforts_.size(); }

  double effort(NodeId v) const { return efforts_[check(v)]; }
  std::span<const double> efforts() const noexcept { return efforts_; }

  // Efforts are player choices and may be revised; the edge set may not.
  void set_effort(NodeId v, double task_effort) {
    if (!(task_effort >= 0.0) || !std::isfinite(task_effort)) {
      throw GraphError("task effort must be a finite nonnegative number");
    }
    efforts_[check(v)] = task_effort;
  }

  std::span<const NodeId> direct_predecessors(NodeId v) const { return in_[check(v)]; }
  std::span<const NodeId> direct_successors(NodeId v) const { return out_[check(v)]; }
  std::size_t in_degree(NodeId v) const { return in_[check(v)].size(); }
  std::size_t out_degree(NodeId v) const { return out_[check(v)].size(); }

  bool has_edge(NodeId from, NodeId to) const {
    const auto& preds = in_[check(to)];
    check(from);
    return std::find(preds.begin(), preds.end(), from) != preds.end();
  }

  /// Weight of the edge from -> to, i.e. 1 / in_degree(to).
  double edge_weight(NodeId from, NodeId to) const {
    if (!has_edge(from, to)) {
      throw GraphError("no edge " + std::to_string(from) + " -> " + std::to_string(to));
    }
    return 1.0 / static_cast<double>(in_[to].size());
  }

  NodeId check(NodeId v) const {
    if (v >= efforts_.size()) throw GraphError("unknown node id " + std::to_string(v));
    return v;
  }

 private:
  std::vector<double> efforts_;
  std::vector<std::vector<NodeId>> in_;
  std::vector<std::vector<NodeId>> out_;
  std::size_t edge_count_ = 0;
};

/// Reusable visitation marks. Bumping the epoch clears all marks in O(1).
class VisitMarks {
 public:
  void reset(std::size_t n) {
    if (marks_.size() < n) marks_.resize(n, 0);
    if (++epoch_ == 0) {
      std::fill(marks_.begin(), marks_.end(), 0);
      epoch_ = 1;
    }
  }
  bool marked(NodeId v) const noexcept { return marks_[v] == epoch_; }
  void mark(NodeId v) noexcept { marks_[v] = epoch_; }
  // Returns true when v was not marked before.
  bool insert(NodeId v) noexcept {
    if (marks_[v] == epoch_) return false;
    marks_[v] = epoch_;
    return true;
  }

 private:
  std::vector<std::uint32_t> marks_;
  std::uint32_t epoch_ = 0;
};

namespace detail {

template <class Next>
std::vector<NodeId> reach(const ReferralDag& dag, NodeId v, Next next) {
  dag.check(v);
  std::vector<char> seen(dag.size(), 0);
  std::vector<NodeId> stack{v};
  std::vector<NodeId> found;
  while (!stack.empty()) {
    const NodeId x = stack.back();
    stack.pop_back();
    for (NodeId y : next(x)) {
      if (!seen[y]) {
        seen[y] = 1;
        found.push_back(y);
        stack.push_back(y);
      }
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

}  // namespace detail

/// Nodes reachable from v by a nonempty path, ascending.
inline std::vector<NodeId> successors(const ReferralDag& dag, NodeId v) {
  return detail::reach(dag, v, [&](NodeId x) { return dag.direct_successors(x); });
}

/// Nodes from which v is reachable by a nonempty path, ascending.
inline std::vector<NodeId> predecessors(const ReferralDag& dag, NodeId v) {
  return detail::reach(dag, v, [&](NodeId x) { return dag.direct_predecessors(x); });
}

/// The subgraph rooted at a node: the node, its successors and the edges among them.
struct RootedSubgraph {
  NodeId root;
  std::vector<NodeId> nodes;                       // ascending, root first
  std::vector<std::pair<NodeId, NodeId>> edges;    // (from, to), both inside
  std::vector<std::uint32_t> local_in_degree;      // parallel to `nodes`

  bool contains(NodeId u) const { return std::binary_search(nodes.begin(), nodes.end(), u); }

  std::size_t in_degree_within(NodeId u) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), u);
    if (it == nodes.end() || *it != u) throw GraphError("node outside rooted subgraph");
    return local_in_degree[static_cast<std::size_t>(it - nodes.begin())];
  }
};

inline RootedSubgraph rooted_subgraph(const ReferralDag& dag, NodeId v) {
  RootedSubgraph view{v, {}, {}, {}};
  view.nodes.push_back(v);
  auto succ = successors(dag, v);
  view.nodes.insert(view.nodes.end(), succ.begin(), succ.end());
  view.local_in_degree.assign(view.nodes.size(), 0);
  for (NodeId x : view.nodes) {
    // Every direct successor of a node inside the view is inside it too.
    for (NodeId y : dag.direct_successors(x)) {
      view.edges.emplace_back(x, y);
      auto it = std::lower_bound(view.nodes.begin(), view.nodes.end(), y);
      ++view.local_in_degree[static_cast<std::size_t>(it - view.nodes.begin())];
    }
  }
  std::sort(view.edges.begin(), view.edges.end());
  return view;
}

/**
 * Scratch space for the ancestor path-weight dynamic program.
 *
 * For a target v it computes, for every ancestor x,
 *   g(x) = sum over paths p from x to v of w(p) * lambda^|p|
 * via g(v) = 1 and g(x) = sum_{y in out(x), y reaches v} w(x->y) * lambda * g(y),
 * evaluated in descending join order. Cost is linear in the ancestor-induced
 * subgraph.
 */
class AncestorAggregator {
 public:
  template <class Visit>
  void run(const ReferralDag& dag, NodeId v, double lambda, Visit&& visit) {
    dag.check(v);
    const std::size_t n = dag.size();
    marks_.reset(n);
    if (g_.size() < n) g_.resize(n);
    ancestors_.clear();
    stack_.assign(1, v);
    marks_.mark(v);
    while (!stack_.empty()) {
      const NodeId x = stack_.back();
      stack_.pop_back();
      for (NodeId p : dag.direct_predecessors(x)) {
        if (marks_.insert(p)) {
          ancestors_.push_back(p);
          stack_.push_back(p);
        }
      }
    }
    std::sort(ancestors_.begin(), ancestors_.end(), std::greater<>());
    g_[v] = 1.0;
    for (NodeId x : ancestors_) {
      double sum = 0.0;
      for (NodeId y : dag.direct_successors(x)) {
        if (marks_.marked(y)) {
          sum += lambda * g_[y] / static_cast<double>(dag.in_degree(y));
        }
      }
      g_[x] = sum;
      visit(x, sum);
    }
  }

 private:
  VisitMarks marks_;
  std::vector<double> g_;
  std::vector<NodeId> ancestors_;
  std::vector<NodeId> stack_;
};

/// g(x) for every ancestor x of v. Nodes that cannot reach v are absent.
inline std::map<NodeId, double> ancestor_path_aggregates(const ReferralDag& dag, NodeId v,
                                                         double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0,1)");
  std::map<NodeId, double> out;
  AncestorAggregator agg;
  agg.run(dag, v, lambda, [&](NodeId x, double g) { out.emplace(x, g); });
  return out;
}

inline constexpr std::size_t kBruteForceNodeLimit = 15;

/// Every directed path from `from` to `to` with its weight and length.
/// Exponential; refuses graphs larger than `node_limit`.
inline std::vector<PathRecord> enumerate_paths_bruteforce(
    const ReferralDag& dag, NodeId from, NodeId to,
    std::size_t node_limit = kBruteForceNodeLimit) {
  if (dag.size() > node_limit) {
    throw GraphError("brute-force path enumeration limited to " + std::to_string(node_limit) +
                     " nodes");
  }
  dag.check(from);
  dag.check(to);
  std::vector<PathRecord> paths;
  if (from == to) return paths;
  struct Frame {
    NodeId node;
    double weight;
    std::size_t length;
  };
  std::vector<Frame> stack{{from, 1.0, 0}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    for (NodeId y : dag.direct_successors(f.node)) {
      const double w = f.weight / static_cast<double>(dag.in_degree(y));
      if (y == to) {
        paths.push_back({w, f.length + 1});
      } else {
        stack.push_back({y, w, f.length + 1});
      }
    }
  }
  return paths;
}

}  // namespace mwc
