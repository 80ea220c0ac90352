#pragma once

#include "mwc/referral_dag.hpp"

namespace fixtures {

// a -> b -> c
inline mwc::ReferralDag chain(double ta, double tb, double tc) {
  mwc::ReferralDag dag;
  dag.add_node(ta);
  dag.add_node(tb, {0});
  dag.add_node(tc, {1});
  return dag;
}

// a -> {b, c} -> d
inline mwc::ReferralDag diamond(double t = 1.0) {
  mwc::ReferralDag dag;
  dag.add_node(t);
  dag.add_node(t, {0});
  dag.add_node(t, {0});
  dag.add_node(t, {1, 2});
  return dag;
}

}  // namespace fixtures
