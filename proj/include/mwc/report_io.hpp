#pragma once

#include <ostream>
#include <string>

#include "json.hpp"
#include "mwc/dag_io.hpp"
#include "mwc/mechanism.hpp"

namespace mwc {

inline constexpr const char* kRewardCsvHeader =
    "node_id,task_effort,credits,win_prob,pool,pi_t,pi_d,pi_total";

inline void write_reward_csv(std::ostream& os, const RewardReport& report) {
  os << kRewardCsvHeader << '\n';
  for (const auto& r : report.nodes) {
    os << r.node << ',' << format_real(r.task_effort) << ',' << format_real(r.credits) << ','
       << format_real(r.win_prob) << ',' << format_real(r.pool) << ',' << format_real(r.pi_t)
       << ',' << format_real(r.pi_d) << ',' << format_real(r.pi_total) << '\n';
  }
}

inline nlohmann::ordered_json params_to_json(const MechanismParams& p) {
  return {{"lambda", p.lambda}, {"eta", p.eta}, {"mu", p.mu}, {"phi", p.phi}, {"sigma", p.sigma}};
}

inline nlohmann::ordered_json reward_report_to_json(const RewardReport& report) {
  nlohmann::ordered_json j;
  j["params"] = params_to_json(report.params);
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& r : report.nodes) {
    nodes.push_back({{"node_id", r.node},
                     {"task_effort", r.task_effort},
                     {"credits", r.credits},
                     {"win_prob", r.win_prob},
                     {"pool", r.pool},
                     {"pi_t", r.pi_t},
                     {"pi_d", r.pi_d},
                     {"pi_total", r.pi_total}});
  }
  j["totals"] = {{"effort", report.totals.effort},
                 {"task_reward", report.totals.task_reward},
                 {"diffusion_reward", report.totals.diffusion_reward},
                 {"total_reward", report.totals.total_reward},
                 {"participants", report.totals.participants},
                 {"payout_ratio", report.payout_ratio()}};
  return j;
}

}  // namespace mwc
