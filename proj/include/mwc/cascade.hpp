#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"
#include "mwc/population.hpp"
#include "mwc/referral_dag.hpp"
#include "mwc/rng.hpp"

namespace mwc {

using UserId = std::uint32_t;

/// Directed follower network. Users get dense ids in order of first
/// appearance; `labels` keeps the external names.
class SocialGraph {
 public:
  struct InEdge {
    UserId from;
    std::uint32_t slot;  // index into out_neighbors(from)
  };

  UserId add_user(std::string label) {
    const auto [it, inserted] = index_.try_emplace(label, static_cast<UserId>(labels_.size()));
    if (inserted) {
      labels_.push_back(std::move(label));
      out_.emplace_back();
      in_.emplace_back();
    }
    return it->second;
  }

  UserId add_users(std::size_t n) {
    const auto first = static_cast<UserId>(labels_.size());
    for (std::size_t i = 0; i < n; ++i) add_user(std::to_string(first + i));
    return first;
  }

  /// Adds from -> to. Returns false for self-loops and repeated edges.
  bool add_edge(UserId from, UserId to) {
    check(from);
    check(to);
    if (from == to || has_edge(from, to)) return false;
    in_[to].push_back({from, static_cast<std::uint32_t>(out_[from].size())});
    out_[from].push_back(to);
    ++edge_count_;
    return true;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::string& label(UserId u) const { return labels_[check(u)]; }
  std::optional<UserId> find(std::string_view label) const {
    const auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::span<const UserId> out_neighbors(UserId u) const { return out_[check(u)]; }
  std::span<const InEdge> in_edges(UserId u) const { return in_[check(u)]; }
  std::size_t out_degree(UserId u) const { return out_[check(u)].size(); }
  std::size_t in_degree(UserId u) const { return in_[check(u)].size(); }

  bool has_edge(UserId from, UserId to) const {
    const auto& o = out_[check(from)];
    return std::find(o.begin(), o.end(), to) != o.end();
  }

  std::optional<std::size_t> slot_of(UserId from, UserId to) const {
    const auto& o = out_[check(from)];
    const auto it = std::find(o.begin(), o.end(), to);
    if (it == o.end()) return std::nullopt;
    return static_cast<std::size_t>(it - o.begin());
  }

  UserId check(UserId u) const {
    if (u >= labels_.size()) throw GraphError("unknown user id " + std::to_string(u));
    return u;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, UserId> index_;
  std::vector<std::vector<UserId>> out_;
  std::vector<std::vector<InEdge>> in_;
  std::size_t edge_count_ = 0;
};

/// p(v -> u), stored next to the out-adjacency of the graph it belongs to.
struct InfluenceProbabilities {
  std::vector<std::vector<double>> p;

  static InfluenceProbabilities zeros(const SocialGraph& g) {
    InfluenceProbabilities out;
    out.p.resize(g.size());
    for (UserId v = 0; v < g.size(); ++v) out.p[v].assign(g.out_degree(v), 0.0);
    return out;
  }

  double get(const SocialGraph& g, UserId from, UserId to) const {
    const auto slot = g.slot_of(from, to);
    if (!slot) throw GraphError("no edge " + g.label(from) + " -> " + g.label(to));
    return p[from][*slot];
  }

  void set(const SocialGraph& g, UserId from, UserId to, double value) {
    const auto slot = g.slot_of(from, to);
    if (!slot) throw GraphError("no edge " + g.label(from) + " -> " + g.label(to));
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("probability must lie in [0,1]");
    p[from][*slot] = value;
  }
};

struct GraphSummary {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t max_degree = 0;  // in + out
  double avg_degree = 0.0;     // 2 * edges / nodes
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

inline GraphSummary summarize(const SocialGraph& g) {
  GraphSummary s;
  s.nodes = g.size();
  s.edges = g.edge_count();
  for (UserId u = 0; u < g.size(); ++u) s.max_degree = std::max(s.max_degree, g.in_degree(u) + g.out_degree(u));
  s.avg_degree = s.nodes ? 2.0 * static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
  return s;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

}  // namespace detail

/// Edge list: one `from<TAB>to` per line; blank lines and `#` comments are skipped.
inline SocialGraph read_edge_list(std::istream& in, GraphSummary* summary = nullptr) {
  SocialGraph g;
  GraphSummary dropped;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    auto fields = detail::split(text, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 'from<TAB>to'");
    }
    const UserId from = g.add_user(fields[0]);
    const UserId to = g.add_user(fields[1]);
    if (from == to) {
      ++dropped.self_loops_dropped;
    } else if (!g.add_edge(from, to)) {
      ++dropped.duplicates_dropped;
    }
  }
  if (summary) {
    *summary = summarize(g);
    summary->self_loops_dropped = dropped.self_loops_dropped;
    summary->duplicates_dropped = dropped.duplicates_dropped;
  }
  return g;
}

inline SocialGraph load_edge_list(const std::string& path, GraphSummary* summary = nullptr) {
  auto in = detail::open_input(path);
  return read_edge_list(in, summary);
}

inline void write_edge_list(std::ostream& os, const SocialGraph& g) {
  os << "# nodes " << g.size() << " edges " << g.edge_count() << '\n';
  for (UserId v = 0; v < g.size(); ++v) {
    for (UserId u : g.out_neighbors(v)) os << g.label(v) << '\t' << g.label(u) << '\n';
  }
}

struct ActionRecord {
  UserId user;
  std::string action;
  std::int64_t timestamp;
};

struct ActionLog {
  std::vector<ActionRecord> records;
};

/// CSV `user_id,action_id,timestamp`, header optional. Users must exist in the graph.
inline ActionLog read_action_log(std::istream& in, const SocialGraph& g) {
  ActionLog log;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (line_no == 1 && text == "user_id,action_id,timestamp") continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto f = detail::split(text, ',');
    if (f.size() != 3 || f[0].empty() || f[1].empty()) throw FormatError(where + "expected user_id,action_id,timestamp");
    const auto user = g.find(f[0]);
    if (!user) throw FormatError(where + "user '" + f[0] + "' is not in the social graph");
    std::int64_t ts = 0;
    const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), ts);
    if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) throw FormatError(where + "bad timestamp '" + f[2] + "'");
    if (!seen.insert(f[0] + '\x1f' + f[1]).second) {
      throw FormatError(where + "user '" + f[0] + "' already performed action '" + f[1] + "'");
    }
    log.records.push_back({*user, f[1], ts});
  }
  return log;
}

inline ActionLog load_action_log(const std::string& path, const SocialGraph& g) {
  auto in = detail::open_input(path);
  return read_action_log(in, g);
}

/**
 * Static Bernoulli estimate: p(v -> u) is the number of actions u performed
 * strictly after v, divided by the number of actions v performed.
 */
inline InfluenceProbabilities estimate_probabilities(const SocialGraph& g, const ActionLog& log) {
  auto probs = InfluenceProbabilities::zeros(g);
  std::vector<std::size_t> performed(g.size(), 0);
  std::unordered_map<std::string, std::vector<std::pair<UserId, std::int64_t>>> by_action;
  for (const auto& r : log.records) {
    g.check(r.user);
    ++performed[r.user];
    by_action[r.action].emplace_back(r.user, r.timestamp);
  }
  std::vector<std::vector<std::size_t>> hits(g.size());
  for (UserId v = 0; v < g.size(); ++v) hits[v].assign(g.out_degree(v), 0);
  std::unordered_map<UserId, std::int64_t> when;
  for (const auto& [action, doers] : by_action) {
    when.clear();
    for (const auto& [user, ts] : doers) when.emplace(user, ts);
    for (const auto& [v, tv] : doers) {
      const auto outs = g.out_neighbors(v);
      for (std::size_t k = 0; k < outs.size(); ++k) {
        const auto it = when.find(outs[k]);
        if (it != when.end() && tv < it->second) ++hits[v][k];
      }
    }
  }
  for (UserId v = 0; v < g.size(); ++v) {
    if (performed[v] == 0) continue;
    for (std::size_t k = 0; k < hits[v].size(); ++k) {
      probs.p[v][k] = static_cast<double>(hits[v][k]) / static_cast<double>(performed[v]);
    }
  }
  return probs;
}

/// CSV `from,to,p` using the graph's labels; zero-probability edges are kept.
inline void write_probabilities_csv(std::ostream& os, const SocialGraph& g, const InfluenceProbabilities& probs) {
  os << "from,to,p\n";
  for (UserId v = 0; v < g.size(); ++v) {
    const auto outs = g.out_neighbors(v);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      os << g.label(v) << ',' << g.label(outs[k]) << ',' << format_real(probs.p[v][k]) << '\n';
    }
  }
}

/// Reads `from,to,p`; every row must name an existing edge. Missing edges default to 0.
inline InfluenceProbabilities read_probabilities_csv(std::istream& in, const SocialGraph& g) {
  auto probs = InfluenceProbabilities::zeros(g);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (line_no == 1 && text == "from,to,p") continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto f = detail::split(text, ',');
    if (f.size() != 3) throw FormatError(where + "expected from,to,p");
    const auto from = g.find(f[0]);
    const auto to = g.find(f[1]);
    if (!from || !to || !g.has_edge(*from, *to)) throw FormatError(where + "edge " + f[0] + " -> " + f[1] + " is not in the social graph");
    const double p = parse_real(f[2], line_no);
    if (!(p >= 0.0 && p <= 1.0)) throw FormatError(where + "probability must lie in [0,1]");
    probs.p[*from][*g.slot_of(*from, *to)] = p;
  }
  return probs;
}

inline InfluenceProbabilities load_probabilities_csv(const std::string& path, const SocialGraph& g) {
  auto in = detail::open_input(path);
  return read_probabilities_csv(in, g);
}

enum class SeedRule { UniformRandom, TopOutDegree };

inline std::string_view to_string(SeedRule r) {
  return r == SeedRule::UniformRandom ? "uniform_random" : "top_out_degree";
}

struct CascadeConfig {
  SeedRule seed_rule = SeedRule::UniformRandom;
  std::size_t seeds = 1;
  std::uint64_t rng_seed = 0;
  std::size_t max_rounds = 1000;
};

/// TopOutDegree is a cheap stand-in for influence maximization: highest out-degree first, ties by id.
inline std::vector<UserId> select_seeds(const SocialGraph& g, SeedRule rule, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("at least one seed is required");
  if (k > g.size()) {
    throw std::invalid_argument("asked for " + std::to_string(k) + " seeds but the graph has " +
                                std::to_string(g.size()) + " nodes");
  }
  std::vector<UserId> ids(g.size());
  std::iota(ids.begin(), ids.end(), UserId{0});
  if (rule == SeedRule::TopOutDegree) {
    std::stable_sort(ids.begin(), ids.end(), [&](UserId a, UserId b) { return g.out_degree(a) > g.out_degree(b); });
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct CascadeResult {
  ReferralDag dag;
  std::vector<UserId> user_of;       // referral node -> social user
  std::vector<PlayerProfile> profiles;  // per referral node
  std::size_t rounds = 0;
  BestResponseResult best_response;  // filled for the best-response effort model
};

/// Activation trace only: which users join, when, and through whom.
struct Activation {
  std::vector<UserId> order;                      // join order
  std::vector<std::vector<NodeId>> referrers;     // per joined node, referral ids
  std::size_t rounds = 0;
};

/**
 * General threshold diffusion with f(S) = 1 - prod(1 - p) over active
 * in-neighbors. Rounds are synchronous: every candidate is tested against the
 * active set at the start of the round, and newcomers join in user-id order
 * with their already-active p > 0 in-neighbors as referrers.
 */
inline Activation run_threshold_cascade(const SocialGraph& g, const InfluenceProbabilities& probs,
                                        std::span<const UserId> seeds, std::span<const double> thresholds,
                                        std::size_t max_rounds) {
  if (thresholds.size() != g.size()) throw std::invalid_argument("one threshold per user required");
  constexpr NodeId kInactive = std::numeric_limits<NodeId>::max();
  std::vector<NodeId> node_of(g.size(), kInactive);
  Activation act;
  for (UserId s : seeds) {
    g.check(s);
    if (node_of[s] != kInactive) continue;
    node_of[s] = static_cast<NodeId>(act.order.size());
    act.order.push_back(s);
    act.referrers.emplace_back();
  }

  std::vector<UserId> frontier(act.order.begin(), act.order.end());
  std::vector<UserId> candidates;
  std::vector<UserId> joined;
  std::vector<NodeId> refs;
  while (!frontier.empty() && act.rounds < max_rounds) {
    candidates.clear();
    for (UserId v : frontier) {
      for (UserId u : g.out_neighbors(v)) {
        if (node_of[u] == kInactive) candidates.push_back(u);
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    joined.clear();
    const auto active_before = static_cast<NodeId>(act.order.size());
    for (UserId u : candidates) {
      double miss = 1.0;
      for (const auto& e : g.in_edges(u)) {
        if (node_of[e.from] < active_before) miss *= 1.0 - probs.p[e.from][e.slot];
      }
      const double f = 1.0 - miss;
      if (f > 0.0 && f >= thresholds[u]) joined.push_back(u);
    }
    if (joined.empty()) break;
    ++act.rounds;
    for (UserId u : joined) {
      refs.clear();
      for (const auto& e : g.in_edges(u)) {
        if (node_of[e.from] < active_before && probs.p[e.from][e.slot] > 0.0) refs.push_back(node_of[e.from]);
      }
      std::sort(refs.begin(), refs.end());
      node_of[u] = static_cast<NodeId>(act.order.size());
      act.order.push_back(u);
      act.referrers.push_back(refs);
    }
    frontier = joined;
  }
  return act;
}

/// Thresholds in (0,1], one per user, in user-id order.
inline std::vector<double> draw_thresholds(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> th(n);
  for (auto& t : th) t = 1.0 - unit(rng);
  return th;
}

/**
 * One cascade run turned into a referral DAG. `profiles` is indexed by social
 * user. Under AbilityProportional each joiner picks its effort on arrival;
 * under BestResponse everyone starts at the task-only choice and the dynamics
 * then run on the finished DAG.
 */
inline CascadeResult simulate_cascade(const SocialGraph& g, const InfluenceProbabilities& probs,
                                      const CascadeConfig& config, std::span<const PlayerProfile> profiles,
                                      const EffortModel& effort_model, const MechanismParams& params) {
  if (profiles.size() != g.size()) throw std::invalid_argument("one profile per social user required");
  Rng rng = make_rng(config.rng_seed, {stream::cascade});
  const auto thresholds = draw_thresholds(g.size(), rng);
  const auto seeds = select_seeds(g, config.seed_rule, config.seeds, rng);
  const auto act = run_threshold_cascade(g, probs, seeds, thresholds, config.max_rounds);

  std::size_t max_out = 0;
  for (UserId u = 0; u < g.size(); ++u) max_out = std::max(max_out, g.out_degree(u));

  CascadeResult out;
  out.rounds = act.rounds;
  out.user_of = act.order;
  out.profiles.reserve(act.order.size());
  for (std::size_t i = 0; i < act.order.size(); ++i) {
    const UserId u = act.order[i];
    PlayerProfile prof = profiles[u];
    prof.node = static_cast<NodeId>(i);
    double t = 0.0;
    if (effort_model.kind == EffortModelKind::AbilityProportional) {
      const double frac = max_out ? static_cast<double>(g.out_degree(u)) / static_cast<double>(max_out) : 0.0;
      t = ability_proportional_effort(prof, frac, params);
    } else {
      t = prof.delta < params.mu ? 1.0 : 0.0;
    }
    out.dag.add_node(t, act.referrers[i]);
    out.profiles.push_back(prof);
  }
  if (effort_model.kind == EffortModelKind::BestResponse) {
    out.best_response = best_response(out.dag, out.profiles, params, effort_model);
  }
  return out;
}

enum class NetworkModel { ErdosRenyiDag, PreferentialAttachment };

inline std::string_view to_string(NetworkModel m) {
  return m == NetworkModel::ErdosRenyiDag ? "erdos_renyi_dag" : "preferential_attachment";
}

struct SyntheticNetwork {
  SocialGraph graph;
  InfluenceProbabilities probs;
};

/**
 * Desk-scale stand-in for a crawled social network.
 *
 * ErdosRenyiDag: each pair i < j carries i -> j with probability `density`.
 * PreferentialAttachment: every newcomer is followed by round(density)
 * distinct existing users picked proportionally to degree + 1.
 * Edge probabilities are U[0, p_max] in edge creation order.
 */
inline SyntheticNetwork generate_synthetic(NetworkModel model, std::size_t n, double density, std::uint64_t rng_seed,
                                           double p_max = 1.0) {
  if (n == 0) throw std::invalid_argument("a synthetic network needs at least one node");
  if (!(p_max >= 0.0 && p_max <= 1.0)) throw std::invalid_argument("p_max must lie in [0,1]");
  Rng rng = make_rng(rng_seed, {stream::network});
  SyntheticNetwork net;
  auto& g = net.graph;
  g.add_users(n);
  std::vector<std::pair<UserId, UserId>> edges;

  if (model == NetworkModel::ErdosRenyiDag) {
    if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("edge density must lie in [0,1]");
    if (density > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double log_q = std::log1p(-density);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t j = i;
        while (true) {
          // geometric skip to the next present pair
          const double skip = density >= 1.0 ? 0.0 : std::floor(std::log(1.0 - unit(rng)) / log_q);
          if (skip >= static_cast<double>(n - j - 1)) break;
          j += 1 + static_cast<std::size_t>(skip);
          edges.emplace_back(static_cast<UserId>(i), static_cast<UserId>(j));
        }
      }
    }
  } else {
    if (!(density >= 1.0) || !std::isfinite(density)) throw std::invalid_argument("attachment degree must be >= 1");
    const auto m = static_cast<std::size_t>(std::llround(density));
    std::vector<UserId> urn;  // each user once, plus once per incident edge
    std::vector<UserId> chosen;
    for (std::size_t u = 0; u < n; ++u) {
      chosen.clear();
      const std::size_t want = std::min(m, u);
      while (chosen.size() < want) {
        std::uniform_int_distribution<std::size_t> pick(0, urn.size() - 1);
        const UserId c = urn[pick(rng)];
        if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
      }
      std::sort(chosen.begin(), chosen.end());
      for (UserId c : chosen) {
        edges.emplace_back(c, static_cast<UserId>(u));
        urn.push_back(c);
        urn.push_back(static_cast<UserId>(u));
      }
      urn.push_back(static_cast<UserId>(u));
    }
  }

  std::uniform_real_distribution<double> prob(0.0, p_max);
  std::vector<double> ps;
  ps.reserve(edges.size());
  for (const auto& [from, to] : edges) {
    g.add_edge(from, to);
    ps.push_back(p_max > 0.0 ? prob(rng) : 0.0);
  }
  net.probs = InfluenceProbabilities::zeros(g);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [from, to] = edges[e];
    net.probs.p[from][*g.slot_of(from, to)] = ps[e];
  }
  return net;
}

/// Largest weakly connected component, relabelled densely; smallest ids win ties.
inline SyntheticNetwork largest_weak_component(const SocialGraph& g, const InfluenceProbabilities& probs) {
  std::vector<UserId> parent(g.size());
  std::iota(parent.begin(), parent.end(), UserId{0});
  auto find = [&](UserId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (UserId v = 0; v < g.size(); ++v) {
    for (UserId u : g.out_neighbors(v)) {
      const auto a = find(v);
      const auto b = find(u);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::size_t> count(g.size(), 0);
  for (UserId v = 0; v < g.size(); ++v) ++count[find(v)];
  UserId best = 0;
  for (UserId r = 0; r < g.size(); ++r) {
    if (count[r] > count[best]) best = r;
  }

  SyntheticNetwork out;
  for (UserId v = 0; v < g.size(); ++v) {
    if (find(v) == best) out.graph.add_user(g.label(v));
  }
  for (UserId v = 0; v < g.size(); ++v) {
    if (find(v) != best) continue;
    for (UserId u : g.out_neighbors(v)) out.graph.add_edge(*out.graph.find(g.label(v)), *out.graph.find(g.label(u)));
  }
  out.probs = InfluenceProbabilities::zeros(out.graph);
  for (UserId v = 0; v < g.size(); ++v) {
    if (find(v) != best) continue;
    const auto outs = g.out_neighbors(v);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      out.probs.set(out.graph, *out.graph.find(g.label(v)), *out.graph.find(g.label(outs[k])), probs.p[v][k]);
    }
  }
  return out;
}

}  // namespace mwc
