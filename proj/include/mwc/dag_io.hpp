#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mwc/referral_dag.hpp"

namespace mwc {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to exactly the same double (17 significant digits).
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_real(const std::string& token, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + token + "'");
  }
}

inline NodeId parse_id(const std::string& token, std::size_t line_no) {
  NodeId v{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw FormatError("line " + std::to_string(line_no) + ": bad node id '" + token + "'");
  }
  return v;
}

inline constexpr const char* kDagHeader = "# mwc-dag v1";

// Layout:
//   # mwc-dag v1
//   N <id> <task_effort>    one per node, join order
//   E <from> <to>           grouped by target in join order
inline void write_dag(std::ostream& os, const ReferralDag& dag) {
  os << kDagHeader << '\n';
  for (NodeId v = 0; v < dag.size(); ++v) os << "N " << v << ' ' << format_real(dag.effort(v)) << '\n';
  for (NodeId v = 0; v < dag.size(); ++v) {
    for (NodeId p : dag.direct_predecessors(v)) os << "E " << p << ' ' << v << '\n';
  }
}

inline ReferralDag read_dag(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line) || line != kDagHeader) {
    throw FormatError("line 1: expected header '" + std::string(kDagHeader) + "'");
  }
  ++line_no;
  std::vector<double> efforts;
  std::vector<std::vector<NodeId>> preds;
  bool in_edges = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag, a, b, extra;
    fields >> tag >> a >> b;
    if (a.empty() || b.empty() || (fields >> extra)) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    if (tag == "N") {
      if (in_edges) throw FormatError("line " + std::to_string(line_no) + ": node after edges");
      NodeId id = parse_id(a, line_no);
      if (id != efforts.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": node ids must be dense and in join order");
      }
      efforts.push_back(parse_real(b, line_no));
      preds.emplace_back();
    } else if (tag == "E") {
      in_edges = true;
      NodeId from = parse_id(a, line_no);
      NodeId to = parse_id(b, line_no);
      if (to >= efforts.size() || from >= to) {
        throw FormatError("line " + std::to_string(line_no) + ": edge must point from an earlier to a later node");
      }
      preds[to].push_back(from);
    } else {
      throw FormatError("line " + std::to_string(line_no) + ": unknown record '" + tag + "'");
    }
  }
  ReferralDag dag;
  for (std::size_t v = 0; v < efforts.size(); ++v) {
    try {
      dag.add_node(efforts[v], preds[v]);
    } catch (const GraphError& e) {
      throw FormatError("node " + std::to_string(v) + ": " + e.what());
    }
  }
  return dag;
}

inline void save_dag(const std::string& path, const ReferralDag& dag) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_dag(os, dag);
}

inline ReferralDag load_dag(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_dag(is);
}

}  // namespace mwc
