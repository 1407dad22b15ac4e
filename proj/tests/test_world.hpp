#pragma once

// Shared scene builders for the unit tests: a two-crawler climbing world at
// desk scale (tiles for walking, floating stairs, one target box).

#include "rhhlgp/kinematics.hpp"
#include "rhhlgp/motion.hpp"

namespace testworld {

using namespace rhhlgp;

inline KinematicWorld climbWorld(int stairs = 1, double c1x = -0.1, double c2x = -1.2) {
  KinematicWorld w;
  Frame tileA;
  tileA.name = "tileA";
  tileA.rel = makePose({-1.55, 0, -0.05}, Quat::Identity());
  tileA.shape = Shape::box(0.95, 0.8, 0.1);
  w.addFrame(tileA);
  Frame tileB;
  tileB.name = "tileB";
  tileB.rel = makePose({-0.525, 0, -0.05}, Quat::Identity());
  tileB.shape = Shape::box(0.95, 0.8, 0.1);
  w.addFrame(tileB);
  for (int k = 1; k <= stairs; ++k) {
    Frame s;
    s.name = "s" + std::to_string(k);
    s.rel = makePose({1.0 * k, 0, 1.0 * k - 0.05}, Quat::Identity());
    s.shape = Shape::box(0.6, 0.8, 0.1);
    w.addFrame(s);
  }
  Frame target;
  target.name = "target";
  target.rel = makePose({1.0 * stairs, 0, 1.0 * stairs + 0.05}, Quat::Identity());
  target.shape = Shape::box(0.1, 0.1, 0.1);
  target.movable = true;
  w.addFrame(target);
  robots::buildCrawler(w, "c1", {c1x, 0, 0}, "xz");
  robots::buildCrawler(w, "c2", {c2x, 0, 0}, "xz");
  w.supports["c1"] = {w.robot("c1").endEffectors[0], "tileB"};
  w.supports["c2"] = {w.robot("c2").endEffectors[0], c2x < -1.05 ? "tileA" : "tileB"};
  return w;
}

inline GroundAction mkAction(const std::string& name, GeomTag tag, std::vector<std::string> binding) {
  GroundAction a;
  a.name = name;
  a.tag = tag;
  a.binding = binding;
  a.key = name + "(";
  for (size_t i = 0; i < binding.size(); ++i) a.key += (i ? "," : "") + binding[i];
  a.key += ")";
  return a;
}

/// Skeleton from hand-made actions (no preconditions, effects optional),
/// folding states from an initial state.
inline Skeleton mkSkeleton(const SymbolicState& init, std::vector<GroundAction> actions) {
  Skeleton s;
  s.states.push_back(init);
  for (auto& a : actions) {
    s.states.push_back(apply(s.states.back(), a));
    s.actions.push_back(std::move(a));
  }
  return s;
}

}  // namespace testworld
