#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"
#include "mwc/referral_dag.hpp"
#include "mwc/rng.hpp"

namespace mwc {

// HO: homogeneous, HL: heterogeneous with low mean, HH: heterogeneous with
// high mean, DI: two distinct clusters.
enum class AbilityGroup { HO, HL, HH, DI };

inline constexpr std::array<AbilityGroup, 4> kAllGroups{AbilityGroup::HO, AbilityGroup::HL,
                                                        AbilityGroup::HH, AbilityGroup::DI};

inline std::string_view to_string(AbilityGroup g) {
  switch (g) {
    case AbilityGroup::HO: return "HO";
    case AbilityGroup::HL: return "HL";
    case AbilityGroup::HH: return "HH";
    case AbilityGroup::DI: return "DI";
  }
  return "?";
}

inline AbilityGroup parse_group(std::string_view s) {
  for (auto g : kAllGroups) {
    if (to_string(g) == s) return g;
  }
  throw std::invalid_argument("unknown ability group '" + std::string(s) + "'");
}

struct GaussianComponent {
  double mean;
  double stddev;
};

/// Distribution of ability means for a group: an equal-weight Gaussian mixture.
inline std::vector<GaussianComponent> group_mean_pdf(AbilityGroup g) {
  switch (g) {
    case AbilityGroup::HO: return {{0.5, 0.05}};
    case AbilityGroup::HL: return {{0.2, 0.7}};
    case AbilityGroup::HH: return {{0.8, 0.7}};
    case AbilityGroup::DI: return {{0.2, 0.05}, {0.8, 0.05}};
  }
  return {};
}

inline constexpr double kIndividualAbilitySpread = 0.05;
inline constexpr double kMinAbility = 0.01;
inline constexpr double kMaxAbility = 0.99;

struct PlayerProfile {
  NodeId node = 0;
  AbilityGroup group = AbilityGroup::HO;
  double ability = 0.5;  // rho
  double delta = 0.5;    // cost coefficient, 1 - rho
};

using GroupMix = std::vector<std::pair<AbilityGroup, double>>;

inline GroupMix pure_mix(AbilityGroup g) { return {{g, 1.0}}; }

inline GroupMix even_mix() {
  return {{AbilityGroup::HO, 0.25}, {AbilityGroup::HL, 0.25}, {AbilityGroup::HH, 0.25}, {AbilityGroup::DI, 0.25}};
}

/**
 * Samples n players. Group membership follows the mix exactly (largest
 * remainder apportionment, then shuffled); each player draws a mean from the
 * group's pdf, then an ability around that mean, clamped to [0.01, 0.99].
 */
inline std::vector<PlayerProfile> sample_profiles(const GroupMix& mix, std::size_t n, std::uint64_t rng_seed) {
  double total = 0.0;
  for (const auto& [g, f] : mix) {
    if (!(f >= 0.0)) throw std::invalid_argument("group fractions must be nonnegative");
    total += f;
  }
  if (mix.empty() || std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("group fractions must sum to 1");

  std::vector<std::size_t> counts(mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    const double exact = mix[i].second * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];

  std::vector<AbilityGroup> groups;
  groups.reserve(n);
  for (std::size_t i = 0; i < mix.size(); ++i) groups.insert(groups.end(), counts[i], mix[i].first);

  Rng rng = make_rng(rng_seed, {stream::profiles});
  std::shuffle(groups.begin(), groups.end(), rng);

  std::vector<PlayerProfile> out(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pdf = group_mean_pdf(groups[i]);
    const auto& component = pdf.size() == 1 ? pdf[0] : pdf[static_cast<std::size_t>(unit(rng) * pdf.size()) % pdf.size()];
    std::normal_distribution<double> mean_dist(component.mean, component.stddev);
    const double mean = mean_dist(rng);
    std::normal_distribution<double> ability_dist(mean, kIndividualAbilitySpread);
    const double rho = std::clamp(ability_dist(rng), kMinAbility, kMaxAbility);
    out[i] = PlayerProfile{static_cast<NodeId>(i), groups[i], rho, 1.0 - rho};
  }
  return out;
}

inline void write_profiles_csv(std::ostream& os, std::span<const PlayerProfile> profiles) {
  os << "node_id,group,ability,delta\n";
  for (const auto& p : profiles) {
    os << p.node << ',' << to_string(p.group) << ',' << format_real(p.ability) << ',' << format_real(p.delta) << '\n';
  }
}

enum class EffortModelKind { AbilityProportional, BestResponse };

inline std::string_view to_string(EffortModelKind k) {
  return k == EffortModelKind::AbilityProportional ? "ability_proportional" : "best_response";
}

struct EffortModel {
  EffortModelKind kind = EffortModelKind::BestResponse;
  double grid_step = 0.1;
  std::size_t max_rounds = 20;
};

/// Effort ρ when the task margin plus a small σ-scaled diffusion prospect is
/// positive, else 0. `out_degree_fraction` is the player's share of the
/// largest out-degree in the social network.
inline double ability_proportional_effort(const PlayerProfile& profile, double out_degree_fraction,
                                          const MechanismParams& params) {
  const double prospect = (params.mu - profile.delta) +
                          params.phi * params.sigma * profile.ability * out_degree_fraction;
  return prospect > 0.0 ? profile.ability : 0.0;
}

/// What a player sees of its own contest when everyone else's effort is fixed.
struct ContestOutlook {
  double downstream = 0.0;     // C: sum over successors of t_u * path aggregate
  double rival_weight = 0.0;   // S: sum of b_u^sigma over other contestants
  double pool = 0.0;           // prize pool of the player's rooted subgraph
};

/// Expected diffusion reward for effort t given the outlook.
inline double projected_diffusion_reward(double t, const ContestOutlook& o, const MechanismParams& params) {
  if (!(t > 0.0) || !(o.pool > 0.0)) return 0.0;
  const double credit = params.eta * t * t + t * o.downstream;
  const double w = contest_weight(credit, params.sigma);
  return w / (w + o.rival_weight) * o.pool;
}

inline std::vector<double> effort_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("effort grid step must lie in (0,1]");
  const auto k = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= k; ++i) grid.push_back(std::min(1.0, static_cast<double>(i) * step));
  if (grid.back() != 1.0) grid.push_back(1.0);
  return grid;
}

/// argmax over the grid of (mu - delta) t + projected diffusion reward; ties go to the smaller effort.
inline double best_response_effort(double delta, const ContestOutlook& outlook, const MechanismParams& params,
                                   std::span<const double> grid) {
  double best_t = 0.0;
  double best_u = 0.0;
  for (double t : grid) {
    const double u = (params.mu - delta) * t + projected_diffusion_reward(t, outlook, params);
    if (u > best_u) {
      best_u = u;
      best_t = t;
    }
  }
  return best_t;
}

struct BestResponseResult {
  std::size_t rounds = 0;
  bool converged = false;
};

/**
 * Asynchronous best-response dynamics over every node of the DAG.
 *
 * A player's contest only involves its successors, so sweeping in reverse
 * join order lets every player respond to final downstream efforts; the
 * second sweep then confirms the fixed point.
 */
inline BestResponseResult best_response(ReferralDag& dag, std::span<const PlayerProfile> profiles,
                                        const MechanismParams& params, const EffortModel& model) {
  if (profiles.size() != dag.size()) throw std::invalid_argument("one profile per node required");
  const auto grid = effort_grid(model.grid_step);
  const std::size_t n = dag.size();
  std::vector<double> downstream(n, 0.0);
  std::vector<double> h(n, 0.0);
  std::vector<std::uint32_t> local_in(n, 0);
  std::vector<NodeId> members;
  std::vector<NodeId> stack;
  VisitMarks marks;

  BestResponseResult result;
  while (result.rounds < model.max_rounds) {
    ++result.rounds;
    bool changed = false;
    for (NodeId v = static_cast<NodeId>(n); v-- > 0;) {
      marks.reset(n);
      members.clear();
      stack.assign(1, v);
      marks.mark(v);
      while (!stack.empty()) {
        const NodeId x = stack.back();
        stack.pop_back();
        for (NodeId y : dag.direct_successors(x)) {
          if (marks.insert(y)) {
            local_in[y] = 0;
            members.push_back(y);
            stack.push_back(y);
          }
          ++local_in[y];
        }
      }
      std::sort(members.begin(), members.end());

      ContestOutlook o;
      h[v] = 1.0;
      double attributed = 0.0;
      for (NodeId u : members) {
        double hu = 0.0;
        for (NodeId x : dag.direct_predecessors(u)) {
          if (marks.marked(x)) hu += h[x];
        }
        h[u] = hu * params.lambda / static_cast<double>(dag.in_degree(u));
        const double tu = dag.effort(u);
        if (tu > 0.0) {
          o.downstream += tu * h[u];
          o.rival_weight += contest_weight(params.eta * tu * tu + tu * downstream[u], params.sigma);
          attributed += tu * static_cast<double>(local_in[u]) / static_cast<double>(dag.in_degree(u));
        }
      }
      o.pool = params.phi * attributed;
      downstream[v] = o.downstream;

      const double t = best_response_effort(profiles[v].delta, o, params, grid);
      if (t != dag.effort(v)) {
        dag.set_effort(v, t);
        changed = true;
      }
    }
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace mwc
