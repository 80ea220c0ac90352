#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "mwc/experiment.hpp"

using namespace mwc;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.network.nodes = 300;
  c.repetitions = 3;
  c.sigma_grid = {0.0, 0.5, 1.0};
  c.attack.sigmas = {0.5};
  c.attack.max_false_identities = 3;
  return c;
}

template <class Rows, class Writer>
std::string dump(const Rows& rows, Writer w) {
  std::ostringstream os;
  w(os, rows);
  return os.str();
}

}  // namespace

TEST_CASE("default config", "[experiment][config]") {
  const ExperimentConfig c;
  CHECK(c.params.lambda == 0.5);
  CHECK(c.params.eta == 0.25);
  CHECK(c.params.mu == 0.9);
  CHECK(c.params.phi == 0.1);
  REQUIRE(c.sigma_grid.size() == 21);
  CHECK(c.sigma_grid.front() == 0.0);
  CHECK(c.sigma_grid[1] == 0.05);
  CHECK(c.sigma_grid.back() == 1.0);
  CHECK(c.repetitions == 20);
  CHECK(c.attack.sigmas == std::vector<double>{0.4, 0.5, 0.6, 0.7});
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config from json", "[experiment][config]") {
  const auto c = config_from_json(json::parse(R"({
    "experiment_id": "x",
    "params": {"lambda": 0.4, "eta": 0.3},
    "sigma_grid": {"start": 0, "stop": 1, "step": 0.25},
    "population": {"groups": ["HH", "DI"], "attack_mix": {"HO": 1}},
    "network": {"model": "erdos_renyi_dag", "nodes": 50, "density": 0.1},
    "cascade": {"seed_rule": "top_out_degree", "seeds": 3},
    "effort_model": {"kind": "ability_proportional"},
    "attack": {"shapes": ["parallel"], "successor_policy": "partitioned", "split": "dirichlet"},
    "rng_seed": 9
  })"));
  CHECK(c.experiment_id == "x");
  CHECK(c.params.lambda == 0.4);
  CHECK(c.params.mu == 0.9);
  CHECK(c.sigma_grid == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(c.sweep_groups == std::vector<AbilityGroup>{AbilityGroup::HH, AbilityGroup::DI});
  CHECK(c.attack_mix.size() == 1);
  CHECK(c.network.model == NetworkModel::ErdosRenyiDag);
  CHECK(c.cascade.seed_rule == SeedRule::TopOutDegree);
  CHECK(c.cascade.seeds == 3);
  CHECK(c.effort_model.kind == EffortModelKind::AbilityProportional);
  CHECK(c.attack.shapes == std::vector<AttackShape>{AttackShape::Parallel});
  CHECK(c.attack.policy == SuccessorPolicy::Partitioned);
  CHECK(c.attack.split == SplitStrategy::Dirichlet);
  CHECK(c.rng_seed == 9);
}

TEST_CASE("config errors", "[experiment][config]") {
  const auto bad = [](const char* text) { return config_from_json(json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"params": {"sigma": 0.5}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"params": {"eta": 0.1}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"params": {"lambda": "half"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"sigma_grid": [0.5, 1.5]})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"sigma_grid": []})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"repetitions": 0})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"population": {"groups": ["XX"]}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"network": {"source": "ftp"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"network": {"source": "files"}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"cascade": {"seeds": 0}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"attack": {"shapes": ["star"]}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config hash is stable and sensitive", "[experiment][config]") {
  ExperimentConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.rng_seed = 43;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(config_from_json(json::parse(config_to_json(a).dump()))) == config_hash(a));
}

TEST_CASE("noise sweep rows", "[experiment][sweep]") {
  const auto c = small_config();
  const auto rows = run_noise_sweep(c);
  REQUIRE(rows.size() == 4 * 3 * 3);
  for (const auto& r : rows) {
    CHECK(r.activated >= c.cascade.seeds);
    CHECK(r.total_effort <= static_cast<double>(r.activated));
    CHECK(r.participant_count <= r.activated);
    CHECK(r.payout_ratio <= 1.0);
    CHECK(r.budget_ok);
    CHECK(r.converged);
  }
  // common random numbers: the same repetition activates the same users at every sigma
  for (std::size_t i = 0; i + 3 < rows.size(); ++i) {
    if (rows[i].group == rows[i + 3].group && rows[i].repetition == rows[i + 3].repetition) {
      CHECK(rows[i].activated == rows[i + 3].activated);
    }
  }
}

TEST_CASE("noise sweep is deterministic across worker counts", "[experiment][sweep]") {
  const auto c = small_config();
  const auto w = [](std::ostream& os, const std::vector<ResultRow>& r) { write_results_csv(os, r, false); };
  const auto one = dump(run_noise_sweep(c, 1), w);
  CHECK(one == dump(run_noise_sweep(c, 3), w));
  CHECK(one.rfind("experiment_id,group,sigma,repetition,activated,total_effort", 0) == 0);
  CHECK(one.find("wall_time_ms") == std::string::npos);
  auto other = c;
  other.rng_seed += 1;
  CHECK(one != dump(run_noise_sweep(other, 1), w));
}

TEST_CASE("sweep summary", "[experiment][sweep]") {
  const auto rows = run_noise_sweep(small_config());
  const auto cells = summarize_sweep(rows);
  REQUIRE(cells.size() == 12);
  for (const auto& c : cells) CHECK(c.n == 3);
  const auto j = sweep_summary_json(rows);
  CHECK(j["peak"].size() == 4);
  CHECK(j["budget_violations"].get<int>() == 0);
}

TEST_CASE("attack eval", "[experiment][attack]") {
  const auto c = small_config();
  const auto rows = run_attack_eval(c, 1);
  REQUIRE_FALSE(rows.empty());
  for (const auto& r : rows) {
    if (r.m == 0) CHECK(r.normalized == 1.0);
    CHECK(r.sigma == 0.5);
    CHECK(r.trial < c.repetitions);
  }
  const auto w = [](std::ostream& os, const std::vector<AttackSweepRow>& r) { write_attack_csv(os, r); };
  const auto text = dump(rows, w);
  CHECK(text.substr(0, text.find('\n')) == kAttackCsvHeader);
  CHECK(text == dump(run_attack_eval(c, 2), w));
}

TEST_CASE("growth exponent fit", "[experiment][bench]") {
  CHECK(fit_growth_exponent({{1, 1}, {2, 4}, {4, 16}}) == Catch::Approx(2.0));
  CHECK(fit_growth_exponent({{10, 5}, {100, 50}}) == Catch::Approx(1.0));
  CHECK(fit_growth_exponent({{10, 5}}) == 0.0);
  const auto r = run_scaling_bench(ExperimentConfig{}, {1, 50, 100});
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].nodes == 1);
  CHECK(r.rows[0].wall_time_ms < 50.0);
}

TEST_CASE("run directories never overwrite", "[experiment][io]") {
  const auto root = std::filesystem::temp_directory_path() / ("mwc_rundir_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  const auto a = make_run_dir(root, "exp");
  const auto b = make_run_dir(root, "exp");
  CHECK(a.filename() == "exp");
  CHECK(b.filename() == "exp-1");
  const auto meta = run_meta(ExperimentConfig{}, "sweep-noise", 2, {"results.csv"});
  CHECK(meta["config_hash"] == config_hash(ExperimentConfig{}));
  CHECK(meta["params"]["mu"] == 0.9);
  std::filesystem::remove_all(root);
}

TEST_CASE("file networks", "[experiment][io]") {
  const auto root = std::filesystem::temp_directory_path() / ("mwc_files_" + std::to_string(::getpid()));
  std::filesystem::create_directories(root);
  std::ofstream(root / "edges.txt") << "a\tb\nb\tc\na\tc\n";
  std::ofstream(root / "probs.csv") << "from,to,p\na,b,1\nb,c,1\na,c,0.5\n";
  ExperimentConfig c = small_config();
  c.network.kind = NetworkSource::Kind::Files;
  c.network.edges_path = (root / "edges.txt").string();
  c.network.probabilities_path = (root / "probs.csv").string();
  c.cascade.seeds = 1;
  c.cascade.seed_rule = SeedRule::TopOutDegree;
  const auto rows = run_noise_sweep(c);
  for (const auto& r : rows) CHECK(r.activated == 3);
  c.network.probabilities_path.clear();
  CHECK_THROWS_AS(NetworkProvider(c), ConfigError);
  std::filesystem::remove_all(root);
}
