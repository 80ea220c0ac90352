#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "mwc/dag_generators.hpp"
#include "mwc/population.hpp"

using namespace mwc;

namespace {

MechanismParams default_params(double sigma = 0.5) {
  return MechanismParams{.lambda = 0.5, .eta = 0.25, .mu = 0.9, .phi = 0.1, .sigma = sigma};
}

}  // namespace

TEST_CASE("pure HO population centres on 0.5", "[population]") {
  const std::size_t n = 20000;
  const auto profiles = sample_profiles(pure_mix(AbilityGroup::HO), n, 1);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& p : profiles) {
    sum += p.ability;
    sq += p.ability * p.ability;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - 0.5) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("pure DI population is bimodal", "[population]") {
  const auto profiles = sample_profiles(pure_mix(AbilityGroup::DI), 10000, 2);
  std::vector<int> bins(10, 0);
  for (const auto& p : profiles) ++bins[std::min(9, static_cast<int>(p.ability * 10))];
  CHECK(bins[1] + bins[2] > 3500);
  CHECK(bins[7] + bins[8] > 3500);
  CHECK(bins[4] + bins[5] < 100);
}

TEST_CASE("profile invariants", "[population]") {
  for (auto g : kAllGroups) {
    for (const auto& p : sample_profiles(pure_mix(g), 2000, 3)) {
      REQUIRE(p.group == g);
      REQUIRE(p.ability >= kMinAbility);
      REQUIRE(p.ability <= kMaxAbility);
      REQUIRE(p.delta == 1.0 - p.ability);
      REQUIRE(p.delta > 0.0);
    }
  }
  CHECK(sample_profiles(pure_mix(AbilityGroup::HH), 0, 1).empty());
}

TEST_CASE("mixed population splits groups exactly", "[population]") {
  const auto profiles = sample_profiles(even_mix(), 1001, 4);
  std::map<AbilityGroup, int> counts;
  for (const auto& p : profiles) ++counts[p.group];
  for (auto g : kAllGroups) CHECK((counts[g] == 250 || counts[g] == 251));
  CHECK(profiles.size() == 1001);
  for (std::size_t i = 0; i < profiles.size(); ++i) CHECK(profiles[i].node == i);
}

TEST_CASE("invalid mixes are rejected", "[population]") {
  CHECK_THROWS(sample_profiles({{AbilityGroup::HO, 0.5}}, 10, 1));
  CHECK_THROWS(sample_profiles({{AbilityGroup::HO, 1.5}, {AbilityGroup::HL, -0.5}}, 10, 1));
  CHECK_THROWS(sample_profiles({}, 10, 1));
  CHECK_THROWS(parse_group("XX"));
  CHECK(parse_group("DI") == AbilityGroup::DI);
}

TEST_CASE("sampling is deterministic", "[population]") {
  std::ostringstream a;
  std::ostringstream b;
  write_profiles_csv(a, sample_profiles(even_mix(), 500, 9));
  write_profiles_csv(b, sample_profiles(even_mix(), 500, 9));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("node_id,group,ability,delta\n", 0) == 0);
}

TEST_CASE("ability-proportional effort", "[population]") {
  const auto p = default_params();
  CHECK(ability_proportional_effort(PlayerProfile{0, AbilityGroup::HO, 0.5, 0.5}, 0.0, p) == 0.5);
  // delta >= mu and no diffusion prospect: stays out
  CHECK(ability_proportional_effort(PlayerProfile{0, AbilityGroup::HL, 0.05, 0.95}, 0.0, p) == 0.0);
  // the bonus can tip a marginal player in
  CHECK(ability_proportional_effort(PlayerProfile{0, AbilityGroup::HL, 0.1, 0.9}, 1.0, p) == 0.1);
}

TEST_CASE("best response single-player choices", "[population]") {
  const auto grid = effort_grid(0.1);
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);

  const auto p = default_params();
  const ContestOutlook none{};
  CHECK(best_response_effort(0.95, none, p, grid) == 0.0);
  CHECK(best_response_effort(0.9, none, p, grid) == 0.0);
  CHECK(best_response_effort(0.5, none, p, grid) == 1.0);

  // At sigma = 0 the diffusion reward is flat in t > 0, so only the smallest positive effort can pay.
  const ContestOutlook outlook{0.3, 2.0, 0.2};
  const auto lottery = default_params(0.0);
  CHECK(best_response_effort(0.5, outlook, lottery, grid) == 1.0);
  CHECK(best_response_effort(0.95, outlook, lottery, grid) == grid[1]);
  CHECK(projected_diffusion_reward(0.3, outlook, lottery) == projected_diffusion_reward(1.0, outlook, lottery));
}

TEST_CASE("projected diffusion reward is nondecreasing in effort", "[population][property]") {
  Rng rng = make_rng(31, {stream::property});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const ContestOutlook o{unit(rng) * 3.0, unit(rng) * 5.0, unit(rng)};
    const auto p = default_params(unit(rng));
    double prev = 0.0;
    for (double t : effort_grid(0.05)) {
      const double r = projected_diffusion_reward(t, o, p);
      REQUIRE(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("monotone participation", "[population][property]") {
  Rng rng = make_rng(32, {stream::property});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto grid = effort_grid(0.1);
  for (int trial = 0; trial < 3000; ++trial) {
    const ContestOutlook o{unit(rng) * 3.0, unit(rng) * 5.0, unit(rng) * 0.5};
    const auto p = default_params(unit(rng));
    const PlayerProfile weak{0, AbilityGroup::HL, 0.02 + 0.9 * unit(rng), 0.0};
    PlayerProfile strong = weak;
    strong.ability = std::min(kMaxAbility, weak.ability + 0.5 * unit(rng));
    const double dw = 1.0 - weak.ability;
    const double ds = 1.0 - strong.ability;
    REQUIRE(best_response_effort(ds, o, p, grid) >= best_response_effort(dw, o, p, grid));
    const double frac = unit(rng);
    REQUIRE(ability_proportional_effort(PlayerProfile{0, strong.group, strong.ability, ds}, frac, p) >=
            ability_proportional_effort(PlayerProfile{0, weak.group, weak.ability, dw}, frac, p));
  }
}

TEST_CASE("best-response dynamics converge deterministically", "[population]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, {stream::network});
    auto dag = sparse_referral_dag(rng, 300, 2.0);
    const auto profiles = sample_profiles(even_mix(), dag.size(), seed);
    auto copy = dag;
    EffortModel model;
    const auto a = best_response(dag, profiles, default_params(0.5), model);
    const auto b = best_response(copy, profiles, default_params(0.5), model);
    REQUIRE(a.converged);
    REQUIRE(a.rounds <= 2);
    REQUIRE(a.rounds == b.rounds);
    for (NodeId v = 0; v < dag.size(); ++v) {
      REQUIRE(dag.effort(v) == copy.effort(v));
      REQUIRE(dag.effort(v) >= 0.0);
      REQUIRE(dag.effort(v) <= 1.0);
      if (profiles[v].delta < 0.9) REQUIRE(dag.effort(v) == 1.0);
    }
  }
}

TEST_CASE("best-response respects max_rounds", "[population]") {
  Rng rng = make_rng(3, {stream::network});
  auto dag = sparse_referral_dag(rng, 50, 2.0);
  const auto profiles = sample_profiles(even_mix(), dag.size(), 3);
  EffortModel model;
  model.max_rounds = 1;
  const auto r = best_response(dag, profiles, default_params(), model);
  CHECK(r.rounds == 1);
  CHECK_FALSE(r.converged);
}
