#pragma once

#include <functional>
#include <optional>

#include "kinematics.hpp"
#include "nlp.hpp"

namespace rhhlgp {

/// Builds and solves the NLPs of a fixed skeleton at two bound levels:
/// P_seq optimizes one keyframe per action (mode-switch poses only), P_path
/// the full discretized path. Feasibility of P_seq is necessary for P_path.
///
/// Feature table, per action tag, emitted at the action's keyframe:
///   pick        manip-ee touches object center          eq, 3 residuals
///   place       carried object bottom on surface        eq 1 + ineq 4 (top rectangle)
///   step        landing ee on target support            eq 1 + ineq 4
///   stepTogether  landing ee on target support          eq 1 + ineq 4
///   connect     coupling end-effectors coincide         eq, 3 residuals
///   disconnect  freed module's ee lands on support      eq 1 + ineq 4
///   none        (cost coupling only)
/// Recurring structure, per keyframe (P_seq) or per step (P_path):
///   support contact chain (no slip)                     eq, 3 per standing robot
///   coupling coincidence for connected assemblies       eq, 3 per coupling
///   joint limits                                        ineq, 2 per limited dof
///   obstacle clearance (P_path only)                    ineq, 1 per ee per obstacle
/// Costs: squared accelerations plus a small velocity regulariser (P_path);
/// squared keyframe differences (P_seq). With a fixed prefix the window opens
/// with one duplicated seam waypoint pinned by position and velocity
/// equalities (2 x dof residuals).

enum class BoundLevel { Seq, Path };

struct Skeleton {
  std::vector<GroundAction> actions;
  std::vector<SymbolicState> states;  // length actions.size() + 1

  void validate() const {
    if (actions.empty()) throw std::invalid_argument("skeleton needs at least one action");
    if (states.size() != actions.size() + 1)
      throw std::invalid_argument("skeleton states must be one longer than actions");
    for (size_t k = 0; k < actions.size(); ++k)
      if (apply(states[k], actions[k]).id != states[k + 1].id)
        throw std::invalid_argument("skeleton states inconsistent at action " + actions[k].key);
  }
};

struct MotionParams {
  int stepsPerPhase = 20;  // T
  double tau = 0.1;        // seconds per path step
  double accelWeight = 1.0;
  double velWeight = 0.1;
  double clearanceMargin = 0.05;
  SolverParams solver;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> waypoints;
  std::vector<int> phaseIndex;  // phase k per waypoint, 0 for a seam duplicate
  double tau = 0.1;
  double cost = 0;
  double maxEqResidual = 0;
  double maxIneqViolation = 0;

  Eigen::VectorXd velocity(size_t i, const Eigen::VectorXd& before) const {
    const Eigen::VectorXd& prev = i == 0 ? before : waypoints[i - 1];
    return (waypoints[i] - prev) / tau;
  }
};

struct SolveResult {
  bool feasible = false;
  Trajectory trajectory;
  int iterations = 0;
  Termination termination = Termination::MaxIter;
};

// ---------------------------------------------------------------------------
// Concrete features
// ---------------------------------------------------------------------------

namespace features {

/// r = sum_i coeff[i] * q_i + offset
struct Linear final : Feature {
  std::vector<double> coeffs;
  Eigen::VectorXd offset;

  int dim() const override { return static_cast<int>(offset.size()); }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    r = offset;
    for (size_t i = 0; i < qs.size(); ++i) r += coeffs[i] * qs[i];
    J.assign(qs.size(), Eigen::MatrixXd());
    for (size_t i = 0; i < qs.size(); ++i)
      J[i] = coeffs[i] * Eigen::MatrixXd::Identity(offset.size(), offset.size());
  }
};

struct PosFeature : Feature {
  std::shared_ptr<const KinematicWorld> world;
};

/// World position of a frame minus a constant target point.
struct TouchPoint final : PosFeature {
  int frame = -1;
  Vec3 target{0, 0, 0};

  int dim() const override { return 3; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fk = world->fk(qs[0]);
    r = fk.pose[frame].pos - target;
    J.assign(1, world->positionJacobian(frame, fk.pose[frame].pos, fk));
  }
};

/// Coincidence of two frames' world positions.
struct PairCoincide final : PosFeature {
  int frameA = -1, frameB = -1;

  int dim() const override { return 3; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fk = world->fk(qs[0]);
    r = fk.pose[frameA].pos - fk.pose[frameB].pos;
    J.assign(1, Eigen::MatrixXd(world->positionJacobian(frameA, fk.pose[frameA].pos, fk) -
                                world->positionJacobian(frameB, fk.pose[frameB].pos, fk)));
  }
};

/// No-slip chain: a frame's world position is equal at two consecutive steps.
struct HoldPosition final : PosFeature {
  int frame = -1;

  int dim() const override { return 3; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fkA = world->fk(qs[0]);
    auto fkB = world->fk(qs[1]);
    r = fkA.pose[frame].pos - fkB.pose[frame].pos;
    J.assign(2, Eigen::MatrixXd());
    J[0] = world->positionJacobian(frame, fkA.pose[frame].pos, fkA);
    J[1] = -world->positionJacobian(frame, fkB.pose[frame].pos, fkB);
  }
};

/// Height of a frame above a given plane z0 (equality: on the plane).
struct HeightEq final : PosFeature {
  int frame = -1;
  double z0 = 0;

  int dim() const override { return 1; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fk = world->fk(qs[0]);
    r.resize(1);
    r[0] = fk.pose[frame].pos.z() - z0;
    J.assign(1, Eigen::MatrixXd(world->positionJacobian(frame, fk.pose[frame].pos, fk).row(2)));
  }
};

/// Axis-aligned rectangle bounds on a frame's xy position (4 inequalities).
struct RectBounds final : PosFeature {
  int frame = -1;
  double cx = 0, cy = 0, hx = 0, hy = 0;

  int dim() const override { return 4; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fk = world->fk(qs[0]);
    double px = fk.pose[frame].pos.x(), py = fk.pose[frame].pos.y();
    r.resize(4);
    r << px - (cx + hx), (cx - hx) - px, py - (cy + hy), (cy - hy) - py;
    auto Jp = world->positionJacobian(frame, fk.pose[frame].pos, fk);
    Eigen::MatrixXd Jf(4, Jp.cols());
    Jf.row(0) = Jp.row(0);
    Jf.row(1) = -Jp.row(0);
    Jf.row(2) = Jp.row(1);
    Jf.row(3) = -Jp.row(1);
    J.assign(1, Jf);
  }
};

/// margin - signedDistance(ee, obstacle) <= 0.
struct ObstacleClear final : PosFeature {
  int frame = -1;
  int obstacleFrame = -1;
  double margin = 0.05;

  int dim() const override { return 1; }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    auto fk = world->fk(qs[0]);
    const Vec3 p = fk.pose[frame].pos;
    const Frame& obs = world->frames[obstacleFrame];
    Vec3 grad;
    double d = signedPointDistance(p, *obs.shape, fk.pose[obstacleFrame], grad);
    r.resize(1);
    r[0] = margin - d;
    J.assign(1, Eigen::MatrixXd(-grad.transpose() * world->positionJacobian(frame, p, fk)));
  }

  static double signedPointDistance(const Vec3& p, const Shape& s, const Transform& pose, Vec3& grad) {
    if (s.kind == ShapeKind::Box) {
      Vec3 local = pose.inverse().apply(p);
      Vec3 h = 0.5 * s.dims;
      Vec3 outside = local.cwiseAbs() - h;
      if ((outside.array() > 0).any()) {
        Vec3 cp = clampToBox(local, h);
        Vec3 d = local - cp;
        double n = d.norm();
        grad = n > 1e-12 ? Vec3(pose.rot * (d / n)) : Vec3(0, 0, 1);
        return n;
      }
      // inside: negative depth along the closest face
      int axis = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i)
        if (outside[i] > best) {
          best = outside[i];
          axis = i;
        }
      Vec3 dir = Vec3::Zero();
      dir[axis] = local[axis] >= 0 ? 1.0 : -1.0;
      grad = pose.rot * dir;
      return best;  // negative
    }
    double d = pointShapeDistance(p, s, pose, &grad);
    if (s.kind == ShapeKind::Sphere) return (p - pose.pos).norm() - s.dims.x();
    return d;
  }
};

/// Joint limits lo <= q <= hi as 2*dof inequalities.
struct JointLimits final : Feature {
  Eigen::VectorXd lo, hi;

  int dim() const override { return 2 * static_cast<int>(lo.size()); }
  void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    int n = static_cast<int>(lo.size());
    r.resize(2 * n);
    r.head(n) = lo - qs[0];
    r.tail(n) = qs[0] - hi;
    Eigen::MatrixXd Jf(2 * n, n);
    Jf.topRows(n) = -Eigen::MatrixXd::Identity(n, n);
    Jf.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
    J.assign(1, Jf);
  }
};

}  // namespace features

// ---------------------------------------------------------------------------
// Skeleton -> NLP builders
// ---------------------------------------------------------------------------

/// The artifact's NLP description for one skeleton at one bound level.
struct MotionSpec {
  BoundLevel level = BoundLevel::Seq;
  NlpProblem problem;
  std::shared_ptr<std::vector<KinematicWorld>> worlds;  // phase worlds [0..K]
  int K = 0;
  int T = 1;  // 1 for P_seq
  double tau = 0.1;
  bool hasPrefix = false;
  Eigen::VectorXd startQ, prevQ;  // x_0 and x_{-1} constants
  std::vector<int> phaseOfVar;
  MotionParams params;
};

namespace detail {

struct SupportRect {
  double cx, cy, hx, hy, topZ;
};

inline SupportRect supportRect(const KinematicWorld& w, const std::string& frameName) {
  int i = w.frameId(frameName);
  if (!w.frames[i].shape || w.frames[i].shape->kind != ShapeKind::Box)
    throw std::invalid_argument("support frame " + frameName + " must be a box");
  auto fk = w.fkCurrent();
  if (!rhhlgp::detail::isAxisAligned(fk.pose[i], 1e-6))
    throw std::invalid_argument("support frame " + frameName + " must be axis-aligned");
  const Vec3& d = w.frames[i].shape->dims;
  return {fk.pose[i].pos.x(), fk.pose[i].pos.y(), 0.5 * d.x(), 0.5 * d.y(),
          fk.pose[i].pos.z() + 0.5 * d.z()};
}

inline double carriedHalfHeight(const KinematicWorld& w, const std::string& objName) {
  int i = w.frameId(objName);
  if (!w.frames[i].shape) return 0.0;
  switch (w.frames[i].shape->kind) {
    case ShapeKind::Box: return 0.5 * w.frames[i].shape->dims.z();
    case ShapeKind::Sphere: return w.frames[i].shape->dims.x();
    case ShapeKind::Capsule: return w.frames[i].shape->dims.x();
  }
  return 0.0;
}

/// Phase worlds with nominal in-NLP attachments: a picked object is carried at
/// the end-effector point itself (the pick equality makes the poses coincide
/// at the switch instant up to tolerance).
inline std::shared_ptr<std::vector<KinematicWorld>> phaseWorlds(const Skeleton& skel,
                                                                const KinematicWorld& start,
                                                                std::string* failReason) {
  auto worlds = std::make_shared<std::vector<KinematicWorld>>();
  worlds->push_back(start);
  std::set<std::string> placed;
  for (const auto& a : skel.actions) {
    const KinematicWorld& prev = worlds->back();
    if (a.tag == GeomTag::Pick || a.tag == GeomTag::Place) {
      const std::string& obj = a.binding[1];
      if (placed.count(obj)) {
        if (failReason) *failReason = "re-manipulating placed object " + obj + " within one skeleton";
        return nullptr;
      }
      if (a.tag == GeomTag::Place) placed.insert(obj);
    }
    KinematicWorld next = prev.applyAction(a);
    if (a.tag == GeomTag::Pick) next.attachments[a.binding[1]].rel = Transform::identity();
    worlds->push_back(std::move(next));
  }
  return worlds;
}

struct SwitchEmitter {
  const KinematicWorld& w;  // world before the switch (phase world k-1)
  std::shared_ptr<const KinematicWorld> wPtr;
  std::vector<std::shared_ptr<const Feature>>& out;
  int step;  // variable index of the keyframe

  template <typename F>
  std::shared_ptr<F> make(FeatureKind kind, const std::string& tag) {
    auto f = std::make_shared<F>();
    f->kind = kind;
    f->tag = tag;
    f->steps = {step};
    f->world = wPtr;
    return f;
  }

  void landing(int eeFrame, const std::string& support, const std::string& tag) {
    auto rect = supportRect(w, support);
    auto z = make<features::HeightEq>(FeatureKind::Eq, tag + "/landing-z");
    z->frame = eeFrame;
    z->z0 = rect.topZ;
    out.push_back(z);
    auto b = make<features::RectBounds>(FeatureKind::Ineq, tag + "/landing-xy");
    b->frame = eeFrame;
    b->cx = rect.cx;
    b->cy = rect.cy;
    b->hx = rect.hx;
    b->hy = rect.hy;
    out.push_back(b);
  }

  void emit(const GroundAction& a) {
    switch (a.tag) {
      case GeomTag::Pick: {
        const std::string& robot = a.binding[0];
        const std::string& obj = a.binding[1];
        if (w.attachments.count(obj)) throw std::logic_error("pick: object already attached: " + obj);
        auto fk = w.fkCurrent();
        auto t = make<features::TouchPoint>(FeatureKind::Eq, "pick/touch");
        t->frame = w.assemblyManipEe(robot);
        t->target = fk.pose[w.frameId(obj)].pos;  // rest pose, constant during the skeleton
        out.push_back(t);
        break;
      }
      case GeomTag::Place: {
        const std::string& obj = a.binding[1];
        const std::string& dest = a.binding[2];
        if (!w.attachments.count(obj)) throw std::logic_error("place: object not attached: " + obj);
        int objFrame = w.frameId(obj);
        auto rect = supportRect(w, dest);
        auto z = make<features::HeightEq>(FeatureKind::Eq, "place/on-z");
        z->frame = objFrame;
        z->z0 = rect.topZ + carriedHalfHeight(w, obj);
        out.push_back(z);
        auto b = make<features::RectBounds>(FeatureKind::Ineq, "place/on-xy");
        b->frame = objFrame;
        b->cx = rect.cx;
        b->cy = rect.cy;
        b->hx = rect.hx;
        b->hy = rect.hy;
        out.push_back(b);
        break;
      }
      case GeomTag::Step: {
        const std::string& robot = a.binding[0];
        auto it = w.supports.find(robot);
        if (it == w.supports.end()) throw std::logic_error("step: no support for " + robot);
        const RobotModel& rm = w.robot(robot);
        int landingEe = rm.endEffectors.at(0) == it->second.eeFrame ? rm.endEffectors.at(1)
                                                                    : rm.endEffectors.at(0);
        landing(landingEe, a.binding[2], "step");
        break;
      }
      case GeomTag::StepTogether: {
        landing(w.assemblyManipEe(a.binding[0]), a.binding[3], "stepTogether");
        break;
      }
      case GeomTag::Connect: {
        const std::string& a0 = a.binding[0];
        const std::string& b0 = a.binding[1];
        int eeA, eeB;
        if (w.robot(a0).kind == RobotKind::Crawler && w.robot(b0).kind == RobotKind::Crawler) {
          eeA = w.assemblyManipEe(a0);
          eeB = w.assemblyManipEe(b0);
        } else {
          const std::string& crawler = w.robot(a0).kind == RobotKind::Crawler ? a0 : b0;
          const std::string& mobile = w.robot(a0).kind == RobotKind::Crawler ? b0 : a0;
          eeA = w.assemblyManipEe(crawler);
          eeB = w.robot(mobile).endEffectors.at(0);
        }
        auto c = make<features::PairCoincide>(FeatureKind::Eq, "connect/coincide");
        c->frameA = eeA;
        c->frameB = eeB;
        out.push_back(c);
        break;
      }
      case GeomTag::Disconnect: {
        const std::string& a0 = a.binding[0];
        const std::string& b0 = a.binding[1];
        std::string hanging = w.supports.count(a0) ? b0 : a0;
        if (w.robot(hanging).kind != RobotKind::MobileBase)
          landing(w.moduleFreeEe(hanging), a.binding[2], "disconnect");
        break;
      }
      case GeomTag::None: break;
    }
  }
};

inline std::shared_ptr<features::JointLimits> jointLimitFeature(const KinematicWorld& w, int step) {
  auto f = std::make_shared<features::JointLimits>();
  f->kind = FeatureKind::Ineq;
  f->tag = "joint-limits";
  f->steps = {step};
  f->lo = Eigen::VectorXd::Constant(w.totalDof, -1e6);
  f->hi = Eigen::VectorXd::Constant(w.totalDof, 1e6);
  for (const auto& fr : w.frames) {
    for (int d = 0; d < fr.joint.dof(); ++d) {
      f->lo[fr.qIndex + d] = fr.joint.lo[d];
      f->hi[fr.qIndex + d] = fr.joint.hi[d];
    }
  }
  return f;
}

/// Support contact chains for one step/keyframe: every standing robot's
/// support end-effector keeps the position it had at the previous step.
inline void emitSupportChains(const KinematicWorld& phaseWorld,
                              std::shared_ptr<const KinematicWorld> wPtr, int step, int prevStep,
                              const std::optional<Eigen::VectorXd>& prevConst,
                              std::vector<std::shared_ptr<const Feature>>& out) {
  for (const auto& [robot, rec] : phaseWorld.supports) {
    if (prevConst) {
      auto fk = phaseWorld.fk(*prevConst);
      auto f = std::make_shared<features::TouchPoint>();
      f->kind = FeatureKind::Eq;
      f->tag = "support/hold";
      f->steps = {step};
      f->world = wPtr;
      f->frame = rec.eeFrame;
      f->target = fk.pose[rec.eeFrame].pos;
      out.push_back(f);
    } else {
      auto f = std::make_shared<features::HoldPosition>();
      f->kind = FeatureKind::Eq;
      f->tag = "support/hold";
      f->steps = {step, prevStep};
      f->world = wPtr;
      f->frame = rec.eeFrame;
      out.push_back(f);
    }
  }
}

inline void emitCouplings(const KinematicWorld& phaseWorld, std::shared_ptr<const KinematicWorld> wPtr,
                          int step, std::vector<std::shared_ptr<const Feature>>& out) {
  for (const auto& c : phaseWorld.couplings) {
    auto f = std::make_shared<features::PairCoincide>();
    f->kind = FeatureKind::Eq;
    f->tag = "coupling/coincide";
    f->steps = {step};
    f->world = wPtr;
    f->frameA = c.eeA;
    f->frameB = c.eeB;
    out.push_back(f);
  }
}

inline std::shared_ptr<features::Linear> linearFeature(FeatureKind kind, const std::string& tag,
                                                       std::vector<int> steps, std::vector<double> coeffs,
                                                       Eigen::VectorXd offset, double weight = 1.0) {
  auto f = std::make_shared<features::Linear>();
  f->kind = kind;
  f->tag = tag;
  f->steps = std::move(steps);
  f->coeffs = std::move(coeffs);
  f->offset = std::move(offset);
  f->weight = weight;
  return f;
}

}  // namespace detail

/// One keyframe per action; switch features per action tag plus support/
/// coupling/limit structure and a smoothness cost between keyframes.
inline MotionSpec buildSequenceNLP(const Skeleton& skel, const KinematicWorld& world,
                                   const MotionParams& params = {}) {
  skel.validate();
  MotionSpec spec;
  spec.level = BoundLevel::Seq;
  spec.K = static_cast<int>(skel.actions.size());
  spec.T = 1;
  spec.tau = 1.0;
  spec.params = params;
  std::string reason;
  spec.worlds = detail::phaseWorlds(skel, world, &reason);
  if (!spec.worlds) throw std::invalid_argument("buildSequenceNLP: " + reason);
  spec.startQ = world.config.q;
  spec.prevQ = world.config.q;
  spec.problem.nSteps = spec.K;
  spec.problem.dof = world.totalDof;
  spec.phaseOfVar.resize(spec.K);

  auto& F = spec.problem.features;
  for (int k = 1; k <= spec.K; ++k) {
    spec.phaseOfVar[k - 1] = k;
    auto wPtr = std::shared_ptr<const KinematicWorld>(spec.worlds, &(*spec.worlds)[k - 1]);
    const KinematicWorld& w = (*spec.worlds)[k - 1];
    // smoothness cost between consecutive keyframes
    if (k == 1)
      F.push_back(detail::linearFeature(FeatureKind::Cost, "smooth", {0}, {1.0}, -spec.startQ));
    else
      F.push_back(detail::linearFeature(FeatureKind::Cost, "smooth", {k - 1, k - 2}, {1.0, -1.0},
                                        Eigen::VectorXd::Zero(world.totalDof)));
    detail::emitSupportChains(w, wPtr, k - 1, k - 2,
                              k == 1 ? std::optional<Eigen::VectorXd>(spec.startQ) : std::nullopt, F);
    detail::emitCouplings(w, wPtr, k - 1, F);
    F.push_back(detail::jointLimitFeature(w, k - 1));
    detail::SwitchEmitter em{w, wPtr, F, k - 1};
    em.emit(skel.actions[k - 1]);
  }
  return spec;
}

struct PathPrefix {
  Eigen::VectorXd endQ;   // committed waypoint at the seam
  Eigen::VectorXd prevQ;  // committed waypoint one step earlier
};

/// Full discretized path: K*T waypoints (plus one duplicated seam waypoint
/// when a fixed prefix is given), running acceleration cost, per-step support
/// and coupling structure, switch features at phase boundaries.
inline MotionSpec buildPathNLP(const Skeleton& skel, const KinematicWorld& world,
                               const std::optional<PathPrefix>& prefix, const MotionParams& params = {}) {
  skel.validate();
  MotionSpec spec;
  spec.level = BoundLevel::Path;
  spec.K = static_cast<int>(skel.actions.size());
  spec.T = params.stepsPerPhase;
  spec.tau = params.tau;
  spec.params = params;
  std::string reason;
  spec.worlds = detail::phaseWorlds(skel, world, &reason);
  if (!spec.worlds) throw std::invalid_argument("buildPathNLP: " + reason);
  spec.hasPrefix = prefix.has_value();
  if (prefix) {
    if (static_cast<int>(prefix->endQ.size()) != world.totalDof)
      throw std::invalid_argument("buildPathNLP: prefix dimension mismatch");
    spec.startQ = prefix->endQ;
    spec.prevQ = prefix->prevQ;
  } else {
    spec.startQ = world.config.q;
    spec.prevQ = world.config.q;
  }

  const int T = spec.T, K = spec.K, dof = world.totalDof;
  const int dup = spec.hasPrefix ? 1 : 0;
  const int nVars = K * T + dup;
  spec.problem.nSteps = nVars;
  spec.problem.dof = dof;
  spec.phaseOfVar.resize(nVars);
  auto& F = spec.problem.features;
  const double tau = spec.tau;
  const double wA = params.accelWeight * std::sqrt(tau);
  const double wV = params.velWeight * std::sqrt(tau);

  // variable v represents time step t = v + 1 - dup; t runs 1..K*T (t=0 is the
  // duplicated seam waypoint when a prefix is present)
  auto varOf = [&](int t) { return t - 1 + dup; };

  if (spec.hasPrefix) {
    Eigen::VectorXd vEnd = (prefix->endQ - prefix->prevQ) / tau;
    auto pos = detail::linearFeature(FeatureKind::Eq, "seam/pos", {varOf(0)}, {1.0}, -prefix->endQ, 10.0);
    pos->tolOverride = 1e-7;
    F.push_back(pos);
    auto vel = detail::linearFeature(FeatureKind::Eq, "seam/vel", {varOf(1), varOf(0)},
                                     {1.0 / tau, -1.0 / tau}, -vEnd, 10.0);
    vel->tolOverride = 1e-5;
    F.push_back(vel);
    // seam acceleration smoothing through the duplicate
    F.push_back(detail::linearFeature(FeatureKind::Cost, "accel", {varOf(0), varOf(1)},
                                      {-2.0 / (tau * tau), 1.0 / (tau * tau)},
                                      spec.prevQ / (tau * tau), wA));
  } else {
    // initial acceleration toward the first step (x_{-1} = x_0 = start)
    F.push_back(detail::linearFeature(FeatureKind::Cost, "accel", {varOf(1)}, {1.0 / (tau * tau)},
                                      -spec.startQ / (tau * tau), wA));
  }

  std::vector<int> obstacles;
  std::vector<int> robotEes;
  for (size_t i = 0; i < world.frames.size(); ++i)
    if (world.frames[i].obstacle) obstacles.push_back(static_cast<int>(i));
  for (const auto& r : world.robots)
    for (int ee : r.endEffectors) robotEes.push_back(ee);

  for (int t = 1; t <= K * T; ++t) {
    int k = (t - 1) / T + 1;
    int v = varOf(t);
    spec.phaseOfVar[v] = k;
    if (spec.hasPrefix && t == 1) spec.phaseOfVar[varOf(0)] = 0;
    auto wPtr = std::shared_ptr<const KinematicWorld>(spec.worlds, &(*spec.worlds)[k - 1]);
    const KinematicWorld& w = (*spec.worlds)[k - 1];

    // velocity regulariser
    if (t == 1 && !spec.hasPrefix)
      F.push_back(detail::linearFeature(FeatureKind::Cost, "vel", {v}, {1.0 / tau}, -spec.startQ / tau, wV));
    else
      F.push_back(detail::linearFeature(FeatureKind::Cost, "vel", {v, v - 1}, {1.0 / tau, -1.0 / tau},
                                        Eigen::VectorXd::Zero(dof), wV));
    // acceleration cost centered at t (involves t-1, t, t+1)
    if (t <= K * T - 1) {
      if (t == 1 && !spec.hasPrefix)
        F.push_back(detail::linearFeature(FeatureKind::Cost, "accel", {v, varOf(2)},
                                          {-2.0 / (tau * tau), 1.0 / (tau * tau)},
                                          spec.startQ / (tau * tau), wA));
      else
        F.push_back(detail::linearFeature(
            FeatureKind::Cost, "accel", {v - 1, v, v + 1},
            {1.0 / (tau * tau), -2.0 / (tau * tau), 1.0 / (tau * tau)}, Eigen::VectorXd::Zero(dof), wA));
    }

    detail::emitSupportChains(w, wPtr, v, v - 1,
                              t == 1 && !spec.hasPrefix ? std::optional<Eigen::VectorXd>(spec.startQ)
                                                        : std::nullopt,
                              F);
    detail::emitCouplings(w, wPtr, v, F);
    F.push_back(detail::jointLimitFeature(w, v));
    for (int obs : obstacles)
      for (int ee : robotEes) {
        auto f = std::make_shared<features::ObstacleClear>();
        f->kind = FeatureKind::Ineq;
        f->tag = "clearance";
        f->steps = {v};
        f->world = wPtr;
        f->frame = ee;
        f->obstacleFrame = obs;
        f->margin = params.clearanceMargin;
        F.push_back(f);
      }
    if (t == k * T) {  // phase boundary: switch features for action k
      detail::SwitchEmitter em{w, wPtr, F, v};
      em.emit(skel.actions[k - 1]);
    }
  }
  return spec;
}

/// Pure re-evaluation of a spec's features at a stacked vector.
inline FeatureEval evaluateFeatures(const MotionSpec& spec, const Eigen::VectorXd& x,
                                    bool withJacobians = true) {
  return evaluateProblem(spec.problem, x, spec.params.solver.eqTol, spec.params.solver.ineqTol,
                         withJacobians);
}

/// Augmented-Lagrangian solve; deterministic for a given seed. One restart
/// with a fresh seed before declaring infeasibility.
inline SolveResult solve(const MotionSpec& spec, uint64_t seed) {
  SolveResult result;
  const int n = spec.problem.nvars();
  auto initialize = [&](uint64_t s) {
    std::mt19937_64 rng(s);
    std::normal_distribution<double> noise(0.0, spec.params.solver.noiseSigma);
    Eigen::VectorXd x(n);
    for (int v = 0; v < spec.problem.nSteps; ++v)
      x.segment(static_cast<Eigen::Index>(v) * spec.problem.dof, spec.problem.dof) = spec.startQ;
    for (int i = 0; i < n; ++i) x[i] += noise(rng);
    return x;
  };
  SolveOutcome best;
  int attempts = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ++attempts;
    SolveOutcome out = solveAula(spec.problem, initialize(seed + attempt), spec.params.solver);
    if (attempt == 0 || (out.feasible && !best.feasible) ||
        (!best.feasible && out.maxEq + out.maxIneq < best.maxEq + best.maxIneq))
      best = std::move(out);
    if (best.feasible) break;
  }
  result.feasible = best.feasible;
  result.termination = best.termination;
  result.iterations = best.innerIters;

  Trajectory& tr = result.trajectory;
  tr.tau = spec.tau;
  tr.cost = best.cost;
  tr.maxEqResidual = best.maxEq;
  tr.maxIneqViolation = best.maxIneq;
  tr.waypoints.resize(spec.problem.nSteps);
  tr.phaseIndex = spec.phaseOfVar;
  for (int v = 0; v < spec.problem.nSteps; ++v)
    tr.waypoints[v] = best.x.segment(static_cast<Eigen::Index>(v) * spec.problem.dof, spec.problem.dof);
  return result;
}

/// Line-oriented trajectory dump: `t=<step> phase=<k> q=<comma separated>`.
inline std::string dumpTrajectory(const Trajectory& tr) {
  std::ostringstream os;
  for (size_t i = 0; i < tr.waypoints.size(); ++i) {
    os << "t=" << i << " phase=" << tr.phaseIndex[i] << " q=";
    for (int j = 0; j < tr.waypoints[i].size(); ++j)
      os << (j ? "," : "") << detail::fmtNum(tr.waypoints[i][j]);
    os << "\n";
  }
  return os.str();
}

}  // namespace rhhlgp
