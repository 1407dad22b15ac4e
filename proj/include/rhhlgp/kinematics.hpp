#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "geometry.hpp"
#include "symbolic.hpp"

namespace rhhlgp {

/// Continuous layer: configuration space, rigid objects, robot models and the
/// kinematic mode switches for pick/place/connect/disconnect.

enum class JointType { Fixed, Revolute, Planar };

struct Joint {
  JointType type = JointType::Fixed;
  Vec3 axis{0, 0, 1};  // revolute axis in the frame's pre-joint local coords
  double lo[2] = {0, 0};
  double hi[2] = {0, 0};

  int dof() const { return type == JointType::Revolute ? 1 : type == JointType::Planar ? 2 : 0; }
};

struct Frame {
  std::string name;
  int parent = -1;  // index into frames; -1 = world root
  Transform rel;    // pose relative to parent, before the joint transform
  std::optional<Shape> shape;
  Joint joint;
  bool movable = false;   // rigid object; pose lives in Configuration or attachments
  bool obstacle = false;  // clearance constraints apply against this frame
  double linkLength = 0;  // serial-chain length contribution (reach)
  bool baseMobility = false;
  int robot = -1;  // owning robot index, -1 for scene frames
  int qIndex = -1;
};

enum class RobotKind { Crawler, MobileBase, Arm };

inline std::string kindName(RobotKind k) {
  switch (k) {
    case RobotKind::Crawler: return "crawler";
    case RobotKind::MobileBase: return "mobile-base";
    case RobotKind::Arm: return "arm";
  }
  return "crawler";
}

inline RobotKind kindFromName(const std::string& s) {
  if (s == "crawler") return RobotKind::Crawler;
  if (s == "mobile-base") return RobotKind::MobileBase;
  if (s == "arm") return RobotKind::Arm;
  throw std::invalid_argument("unknown robot kind: " + s);
}

struct RobotModel {
  RobotKind kind = RobotKind::Crawler;
  std::string name;
  std::vector<int> frames;
  std::vector<int> endEffectors;  // crawler: [tail, head]; arm: [gripper]; base: [anchor]
  int baseFrame = -1;
  int dof = 0;
  double reach = 0;
  std::string plane = "xz";     // locomotion plane for crawlers
  std::string declaredBase;     // scene frame named in the robot declaration
};

struct Configuration {
  Eigen::VectorXd q;
  std::map<std::string, Transform> objectPoses;  // unattached movable frames
};

struct Attachment {
  int holderEe = -1;  // end-effector frame index
  Transform rel;      // object pose relative to the holder ee
};

struct Coupling {
  std::string robotA, robotB;
  int eeA = -1, eeB = -1;  // coincident end-effector frames
};

struct SupportRec {
  int eeFrame = -1;     // which end-effector carries the contact
  std::string support;  // frame the robot stands on
};

struct FkResult {
  std::vector<Transform> pose;    // world pose per frame
  std::vector<Transform> anchor;  // world pose of each frame's joint anchor (parent * rel)
};

class KinematicWorld {
 public:
  std::vector<Frame> frames;
  std::map<std::string, int> frameIndex;
  std::vector<RobotModel> robots;
  std::map<std::string, int> robotIndex;
  std::map<std::string, Attachment> attachments;  // object frame name -> holder
  std::vector<Coupling> couplings;
  std::map<std::string, SupportRec> supports;  // robot name -> standing contact
  Configuration config;
  int totalDof = 0;
  std::vector<std::string> switchHistory;

  int addFrame(Frame f) {
    if (frameIndex.count(f.name)) throw std::invalid_argument("duplicate frame " + f.name);
    if (f.parent >= static_cast<int>(frames.size()))
      throw std::invalid_argument("frame " + f.name + ": parent must be added first");
    if (f.movable && (f.parent != -1 || f.joint.type != JointType::Fixed))
      throw std::invalid_argument("movable frame " + f.name + " must be a world-rooted leaf");
    f.qIndex = f.joint.dof() > 0 ? totalDof : -1;
    totalDof += f.joint.dof();
    frames.push_back(f);
    frameIndex[f.name] = static_cast<int>(frames.size()) - 1;
    if (f.movable) config.objectPoses[f.name] = f.rel;
    if (config.q.size() != totalDof) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(totalDof);
      q.head(config.q.size()) = config.q;
      config.q = q;
    }
    return frameIndex[f.name];
  }

  int frameId(const std::string& name) const {
    auto it = frameIndex.find(name);
    if (it == frameIndex.end()) throw std::invalid_argument("unknown frame: " + name);
    return it->second;
  }
  const RobotModel& robot(const std::string& name) const {
    auto it = robotIndex.find(name);
    if (it == robotIndex.end()) throw std::invalid_argument("unknown robot: " + name);
    return robots[it->second];
  }
  bool isRobot(const std::string& name) const { return robotIndex.count(name) > 0; }

  // ---- forward kinematics ------------------------------------------------

  FkResult fk(const Eigen::VectorXd& q) const {
    if (q.size() != totalDof)
      throw std::invalid_argument("fk: configuration dimension " + std::to_string(q.size()) +
                                  " != world dof " + std::to_string(totalDof));
    FkResult r;
    r.pose.resize(frames.size());
    r.anchor.resize(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
      const Frame& f = frames[i];
      if (f.movable) continue;  // second pass
      Transform parent = f.parent < 0 ? Transform::identity() : r.pose[f.parent];
      Transform a = parent * f.rel;
      r.anchor[i] = a;
      switch (f.joint.type) {
        case JointType::Fixed: r.pose[i] = a; break;
        case JointType::Revolute: {
          double th = q[f.qIndex];
          Quat rot(Eigen::AngleAxisd(th, f.joint.axis.normalized()));
          r.pose[i] = a * Transform{{0, 0, 0}, rot};
          break;
        }
        case JointType::Planar: {
          r.pose[i] = a * Transform{{q[f.qIndex], q[f.qIndex + 1], 0}, Quat::Identity()};
          break;
        }
      }
    }
    for (size_t i = 0; i < frames.size(); ++i) {
      const Frame& f = frames[i];
      if (!f.movable) continue;
      auto att = attachments.find(f.name);
      if (att != attachments.end()) {
        r.pose[i] = r.pose[att->second.holderEe] * att->second.rel;
      } else {
        auto it = config.objectPoses.find(f.name);
        if (it == config.objectPoses.end()) throw std::logic_error("movable frame without pose: " + f.name);
        r.pose[i] = it->second;
      }
      r.anchor[i] = r.pose[i];
    }
    return r;
  }

  FkResult fkCurrent() const { return fk(config.q); }

  /// Analytic Jacobian of the world position of `point` (a world-space point
  /// rigidly attached to frame `frameIdx`) with respect to q.
  Eigen::Matrix3Xd positionJacobian(int frameIdx, const Vec3& point, const FkResult& fkRes) const {
    Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, totalDof);
    int f = frameIdx;
    if (frames[f].movable) {
      auto att = attachments.find(frames[f].name);
      if (att == attachments.end()) return J;  // resting object: constant pose
      f = att->second.holderEe;
    }
    while (f >= 0) {
      const Frame& fr = frames[f];
      if (fr.joint.type == JointType::Revolute) {
        Vec3 axisW = fkRes.anchor[f].rot * fr.joint.axis.normalized();
        J.col(fr.qIndex) += axisW.cross(point - fkRes.anchor[f].pos);
      } else if (fr.joint.type == JointType::Planar) {
        J.col(fr.qIndex) += fkRes.anchor[f].rot * Vec3::UnitX();
        J.col(fr.qIndex + 1) += fkRes.anchor[f].rot * Vec3::UnitY();
      }
      f = fr.parent;
    }
    return J;
  }

  // ---- assemblies ----------------------------------------------------------

  /// Robot names in the coupled component of `name` (includes `name`).
  std::vector<std::string> assemblyOf(const std::string& name) const {
    std::set<std::string> comp{name};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& c : couplings) {
        bool a = comp.count(c.robotA), b = comp.count(c.robotB);
        if (a != b) {
          comp.insert(a ? c.robotB : c.robotA);
          grew = true;
        }
      }
    }
    return {comp.begin(), comp.end()};
  }

  /// Structural reach: sum of link lengths of the serial chain; coupled
  /// modules sum their chains. Invariant under configuration changes.
  double reach(const std::string& robotName) const {
    double total = 0;
    for (const auto& rn : assemblyOf(robotName)) total += robot(rn).reach;
    return total;
  }

  int articulatedJointCount(const std::string& robotName) const {
    int n = 0;
    for (const auto& rn : assemblyOf(robotName))
      for (int fi : robot(rn).frames)
        if (frames[fi].joint.type == JointType::Revolute && !frames[fi].baseMobility) ++n;
    return n;
  }

  bool assemblyHasMobileBase(const std::string& robotName) const {
    for (const auto& rn : assemblyOf(robotName))
      if (robot(rn).kind == RobotKind::MobileBase) return true;
    return false;
  }

  std::set<int> coupledEes() const {
    std::set<int> s;
    for (const auto& c : couplings) {
      s.insert(c.eeA);
      s.insert(c.eeB);
    }
    return s;
  }

  /// The free manipulation end-effector of the assembly containing `robotName`:
  /// the unique end-effector that neither carries a support contact nor is
  /// coupled to another module.
  int assemblyManipEe(const std::string& robotName) const {
    auto coupled = coupledEes();
    std::set<int> supportEes;
    for (const auto& [r, s] : supports) supportEes.insert(s.eeFrame);
    std::vector<int> free;
    for (const auto& rn : assemblyOf(robotName))
      for (int ee : robot(rn).endEffectors)
        if (!coupled.count(ee) && !supportEes.count(ee)) free.push_back(ee);
    if (free.size() != 1)
      throw std::logic_error("assembly of " + robotName + " has " + std::to_string(free.size()) +
                             " free end-effectors, expected 1");
    return free[0];
  }

  /// The free end of a single module, ignoring supports (used for landings).
  int moduleFreeEe(const std::string& robotName) const {
    auto coupled = coupledEes();
    for (int ee : robot(robotName).endEffectors)
      if (!coupled.count(ee)) return ee;
    throw std::logic_error("module " + robotName + " has no free end-effector");
  }

  // ---- geometric queries ---------------------------------------------------

  /// Euclidean distance between the nearest surface points of two frames'
  /// shapes in this world's current (initial) configuration. Clamped at 0.
  double supportDistance(const std::string& a, const std::string& b) const {
    int ia = frameId(a), ib = frameId(b);
    if (!frames[ia].shape || !frames[ib].shape)
      throw std::invalid_argument("supportDistance: frame without shape: " +
                                  (!frames[ia].shape ? a : b));
    auto f = fkCurrent();
    return shapeDistance(*frames[ia].shape, f.pose[ia], *frames[ib].shape, f.pose[ib]);
  }

  double supportTopZ(const std::string& name) const {
    int i = frameId(name);
    if (!frames[i].shape || frames[i].shape->kind != ShapeKind::Box)
      throw std::invalid_argument("supportTopZ: " + name + " is not a box");
    auto f = fkCurrent();
    return f.pose[i].pos.z() + 0.5 * frames[i].shape->dims.z();
  }

  // ---- mode switches ---------------------------------------------------------

  /// Kinematic mode switch for pick/place/connect/disconnect. Returns a new
  /// world; the input is unchanged. World poses of all frames are preserved
  /// across the switch (attachments capture the exact relative transform).
  KinematicWorld applyModeSwitch(const GroundAction& action) const {
    if (action.tag != GeomTag::Pick && action.tag != GeomTag::Place &&
        action.tag != GeomTag::Connect && action.tag != GeomTag::Disconnect)
      throw std::logic_error("applyModeSwitch: action " + action.key + " is not a mode switch");
    KinematicWorld w = *this;
    auto f = fkCurrent();
    switch (action.tag) {
      case GeomTag::Pick: {
        const std::string& robot = action.binding[0];
        const std::string& object = action.binding[1];
        if (attachments.count(object)) throw std::logic_error("pick: " + object + " already attached");
        int obj = frameId(object);
        if (!frames[obj].movable) throw std::logic_error("pick: " + object + " is not movable");
        int ee = assemblyManipEe(robot);
        Attachment att;
        att.holderEe = ee;
        att.rel = f.pose[ee].inverse() * f.pose[obj];
        w.attachments[object] = att;
        w.config.objectPoses.erase(object);
        break;
      }
      case GeomTag::Place: {
        const std::string& object = action.binding[1];
        auto it = attachments.find(object);
        if (it == attachments.end()) throw std::logic_error("place: " + object + " is not attached");
        int obj = frameId(object);
        w.config.objectPoses[object] = f.pose[obj];
        w.attachments.erase(object);
        break;
      }
      case GeomTag::Connect: {
        const std::string& a = action.binding[0];
        const std::string& b = action.binding[1];
        for (const auto& c : couplings)
          if ((c.robotA == a && c.robotB == b) || (c.robotA == b && c.robotB == a))
            throw std::logic_error("connect: " + a + " and " + b + " already connected");
        Coupling c;
        c.robotA = a;
        c.robotB = b;
        if (robot(a).kind == RobotKind::Crawler && robot(b).kind == RobotKind::Crawler) {
          // crawlers join at their free (non-support) ends; the second module
          // lifts off its support and becomes the far end of the merged chain
          c.eeA = w.assemblyManipEe(a);
          c.eeB = w.assemblyManipEe(b);
          w.supports.erase(b);
        } else {
          const std::string& crawler = robot(a).kind == RobotKind::Crawler ? a : b;
          const std::string& mobile = robot(a).kind == RobotKind::Crawler ? b : a;
          if (robot(mobile).kind != RobotKind::MobileBase)
            throw std::logic_error("connect: unsupported pair " + a + "," + b);
          c.eeA = w.assemblyManipEe(crawler);
          c.eeB = robot(mobile).endEffectors.at(0);
          w.supports.erase(crawler);  // the crawler rides; no ground contact
        }
        w.couplings.push_back(c);
        break;
      }
      case GeomTag::Disconnect: {
        const std::string& a = action.binding[0];
        const std::string& b = action.binding[1];
        const std::string& landing = action.binding[2];
        auto it = std::find_if(w.couplings.begin(), w.couplings.end(), [&](const Coupling& c) {
          return (c.robotA == a && c.robotB == b) || (c.robotA == b && c.robotB == a);
        });
        if (it == w.couplings.end())
          throw std::logic_error("disconnect: " + a + " and " + b + " are not connected");
        w.couplings.erase(it);
        // the module that hung free lands its free end on the named support
        std::string hanging = supports.count(a) ? b : a;
        if (robot(hanging).kind != RobotKind::MobileBase)
          w.supports[hanging] = {w.moduleFreeEe(hanging), landing};
        break;
      }
      default: break;
    }
    w.switchHistory.push_back(action.key);
    return w;
  }

  /// Advances the attachment/support structure by any action. Steps flip the
  /// stepping assembly's support contact; `none`-tagged actions are no-ops.
  KinematicWorld applyAction(const GroundAction& action) const {
    switch (action.tag) {
      case GeomTag::Pick:
      case GeomTag::Place:
      case GeomTag::Connect:
      case GeomTag::Disconnect: return applyModeSwitch(action);
      case GeomTag::Step: {
        KinematicWorld w = *this;
        const std::string& r = action.binding[0];
        auto it = w.supports.find(r);
        if (it == w.supports.end()) throw std::logic_error("step: robot " + r + " has no support");
        const RobotModel& rm = robot(r);
        int other = rm.endEffectors.at(0) == it->second.eeFrame ? rm.endEffectors.at(1)
                                                                : rm.endEffectors.at(0);
        w.supports[r] = {other, action.binding[2]};
        w.switchHistory.push_back(action.key);
        return w;
      }
      case GeomTag::StepTogether: {
        KinematicWorld w = *this;
        const std::string& lead = action.binding[0];
        const std::string& mate = action.binding[1];
        if (!w.supports.count(lead)) throw std::logic_error("stepTogether: " + lead + " has no support");
        int landingEe = w.assemblyManipEe(lead);
        w.supports.erase(lead);
        w.supports[mate] = {landingEe, action.binding[3]};
        w.switchHistory.push_back(action.key);
        return w;
      }
      case GeomTag::None: return *this;
    }
    return *this;
  }

  void setJointConfiguration(const Eigen::VectorXd& q) {
    if (q.size() != totalDof) throw std::invalid_argument("setJointConfiguration: dimension mismatch");
    config.q = q;
  }
};

// ---------------------------------------------------------------------------
// Robot model builders
// ---------------------------------------------------------------------------

namespace robots {

constexpr double kCrawlerLinkLength = 0.2;
constexpr int kCrawlerLinks = 7;
constexpr double kArmLinkLength = 0.13;
constexpr double kMobileBodySize = 0.3;

/// Snake-like module: planar base translation in the locomotion plane, one
/// in-plane base rotation, then 7 revolute links of equal length with two
/// spherical end-effector points (tail at the base, head at the tip).
inline void buildCrawler(KinematicWorld& w, const std::string& name, const Vec3& tailPos,
                         const std::string& plane, double linkLen = kCrawlerLinkLength) {
  RobotModel rm;
  rm.kind = RobotKind::Crawler;
  rm.name = name;
  rm.plane = plane;
  Quat mountQ = Quat::Identity();
  Vec3 linkAxis = Vec3::UnitY();
  if (plane == "xz") {
    mountQ = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitX()));  // local xy-plane -> world xz-plane
    linkAxis = Vec3::UnitZ();
  } else if (plane != "xy") {
    throw std::invalid_argument("crawler plane must be xz or xy");
  }
  int robotIdx = static_cast<int>(w.robots.size());
  auto add = [&](Frame f) {
    f.robot = robotIdx;
    int id = w.addFrame(std::move(f));
    rm.frames.push_back(id);
    return id;
  };
  Frame mount;
  mount.name = name + "_mount";
  mount.rel = makePose(tailPos, mountQ);
  rm.baseFrame = add(mount);

  Frame root;
  root.name = name + "_root";
  root.parent = rm.baseFrame;
  root.joint.type = JointType::Planar;
  root.joint.lo[0] = root.joint.lo[1] = -20;
  root.joint.hi[0] = root.joint.hi[1] = 20;
  root.baseMobility = true;
  int rootId = add(root);

  Frame yaw;
  yaw.name = name + "_yaw";
  yaw.parent = rootId;
  yaw.joint.type = JointType::Revolute;
  yaw.joint.axis = Vec3::UnitZ();
  yaw.joint.lo[0] = -3.2;
  yaw.joint.hi[0] = 3.2;
  yaw.baseMobility = true;
  int prev = add(yaw);

  Frame tail;
  tail.name = name + "_ee0";
  tail.parent = prev;
  int tailId = add(tail);

  for (int i = 1; i <= kCrawlerLinks; ++i) {
    Frame link;
    link.name = name + "_l" + std::to_string(i);
    link.parent = prev;
    link.rel = makePose(i == 1 ? Vec3::Zero() : Vec3(linkLen, 0, 0), Quat::Identity());
    link.joint.type = JointType::Revolute;
    link.joint.axis = linkAxis;
    link.joint.lo[0] = -2.8;
    link.joint.hi[0] = 2.8;
    link.linkLength = i == 1 ? 0 : linkLen;
    prev = add(link);
  }
  Frame head;
  head.name = name + "_ee1";
  head.parent = prev;
  head.rel = makePose(Vec3(linkLen, 0, 0), Quat::Identity());
  head.linkLength = linkLen;
  int headId = add(head);

  rm.endEffectors = {tailId, headId};
  rm.dof = 2 + 1 + kCrawlerLinks;
  rm.reach = kCrawlerLinks * linkLen;
  w.robots.push_back(rm);
  w.robotIndex[name] = robotIdx;
}

/// Cube-shaped robot free to translate in the world xy-plane, with a top
/// anchor point that crawler modules can connect to.
inline void buildMobileBase(KinematicWorld& w, const std::string& name, const Vec3& pos) {
  RobotModel rm;
  rm.kind = RobotKind::MobileBase;
  rm.name = name;
  int robotIdx = static_cast<int>(w.robots.size());
  auto add = [&](Frame f) {
    f.robot = robotIdx;
    int id = w.addFrame(std::move(f));
    rm.frames.push_back(id);
    return id;
  };
  Frame mount;
  mount.name = name + "_mount";
  mount.rel = makePose({pos.x(), pos.y(), 0.5 * kMobileBodySize}, Quat::Identity());
  rm.baseFrame = add(mount);

  Frame root;
  root.name = name + "_root";
  root.parent = rm.baseFrame;
  root.joint.type = JointType::Planar;
  root.joint.lo[0] = root.joint.lo[1] = -20;
  root.joint.hi[0] = root.joint.hi[1] = 20;
  root.baseMobility = true;
  int rootId = add(root);

  Frame body;
  body.name = name + "_body";
  body.parent = rootId;
  body.shape = Shape::box(kMobileBodySize, kMobileBodySize, kMobileBodySize);
  add(body);

  Frame anchor;
  anchor.name = name + "_anchor";
  anchor.parent = rootId;
  anchor.rel = makePose({0, 0, 0.5 * kMobileBodySize}, Quat::Identity());
  anchor.linkLength = 0.5 * kMobileBodySize;
  int anchorId = add(anchor);

  rm.endEffectors = {anchorId};
  rm.dof = 2;
  rm.reach = 0.5 * kMobileBodySize;
  w.robots.push_back(rm);
  w.robotIndex[name] = robotIdx;
}

/// Fixed-base 7-DoF arm with a gripper point end-effector.
inline void buildArm(KinematicWorld& w, const std::string& name, const Vec3& basePos,
                     double linkLen = kArmLinkLength) {
  RobotModel rm;
  rm.kind = RobotKind::Arm;
  rm.name = name;
  int robotIdx = static_cast<int>(w.robots.size());
  auto add = [&](Frame f) {
    f.robot = robotIdx;
    int id = w.addFrame(std::move(f));
    rm.frames.push_back(id);
    return id;
  };
  Frame mount;
  mount.name = name + "_mount";
  mount.rel = makePose(basePos, Quat::Identity());
  rm.baseFrame = add(mount);

  const Vec3 axes[7] = {Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitY(), Vec3::UnitZ(),
                        Vec3::UnitY(), Vec3::UnitY(), Vec3::UnitZ()};
  int prev = rm.baseFrame;
  for (int i = 0; i < 7; ++i) {
    Frame link;
    link.name = name + "_l" + std::to_string(i + 1);
    link.parent = prev;
    link.rel = makePose(i == 0 ? Vec3::Zero() : Vec3(linkLen, 0, 0), Quat::Identity());
    link.joint.type = JointType::Revolute;
    link.joint.axis = axes[i];
    link.joint.lo[0] = -2.9;
    link.joint.hi[0] = 2.9;
    link.linkLength = i == 0 ? 0 : linkLen;
    prev = add(link);
  }
  Frame gripper;
  gripper.name = name + "_ee";
  gripper.parent = prev;
  gripper.rel = makePose(Vec3(linkLen, 0, 0), Quat::Identity());
  gripper.linkLength = linkLen;
  int g = add(gripper);

  rm.endEffectors = {g};
  rm.dof = 7;
  rm.reach = 7 * linkLen;
  w.robots.push_back(rm);
  w.robotIndex[name] = robotIdx;
}

}  // namespace robots

// ---------------------------------------------------------------------------
// Scene file format. One declaration per line, '#' comments:
//   frame <name> parent=<name|world> pos=x,y,z quat=w,x,y,z shape=box:wx,wy,wz
//         [movable=1] [obstacle=1] [joint=revolute:ax,ay,az|planar|fixed]
//   robot <kind> name=<n> base=<frame> [plane=xz|xy]
// Units are meters and radians. Robot frames are built from the kind model.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> parseNumbers(const std::string& s) {
  std::vector<double> out;
  std::string tmp = s;
  for (auto& c : tmp)
    if (c == ',') c = ' ';
  std::istringstream is(tmp);
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

inline std::string fmtNum(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

inline KinematicWorld parseScene(const std::string& text) {
  KinematicWorld w;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    auto hashPos = line.find('#');
    if (hashPos != std::string::npos) line = line.substr(0, hashPos);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    try {
      std::map<std::string, std::string> kv;
      std::string name, tok;
      ls >> name;
      while (ls >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      if (head == "frame") {
        Frame f;
        f.name = name;
        if (kv.count("parent") && kv["parent"] != "world") f.parent = w.frameId(kv["parent"]);
        Vec3 pos = Vec3::Zero();
        Quat quat = Quat::Identity();
        if (kv.count("pos")) {
          auto v = detail::parseNumbers(kv["pos"]);
          if (v.size() != 3) throw std::invalid_argument("pos needs 3 numbers");
          pos = {v[0], v[1], v[2]};
        }
        if (kv.count("quat")) {
          auto v = detail::parseNumbers(kv["quat"]);
          if (v.size() != 4) throw std::invalid_argument("quat needs 4 numbers");
          quat = Quat(v[0], v[1], v[2], v[3]);
        }
        f.rel = makePose(pos, quat);
        if (kv.count("shape")) {
          const std::string& s = kv["shape"];
          auto colon = s.find(':');
          std::string kind = s.substr(0, colon);
          auto dims = colon == std::string::npos ? std::vector<double>{} : detail::parseNumbers(s.substr(colon + 1));
          if (kind == "box" && dims.size() == 3) f.shape = Shape::box(dims[0], dims[1], dims[2]);
          else if (kind == "sphere" && dims.size() == 1) f.shape = Shape::sphere(dims[0]);
          else if (kind == "capsule" && dims.size() == 2) f.shape = Shape::capsule(dims[0], dims[1]);
          else throw std::invalid_argument("bad shape spec: " + s);
        }
        if (kv.count("joint")) {
          const std::string& j = kv["joint"];
          if (j == "planar") {
            f.joint.type = JointType::Planar;
            f.joint.lo[0] = f.joint.lo[1] = -20;
            f.joint.hi[0] = f.joint.hi[1] = 20;
          } else if (j == "fixed") {
            f.joint.type = JointType::Fixed;
          } else if (j.rfind("revolute:", 0) == 0) {
            auto ax = detail::parseNumbers(j.substr(9));
            if (ax.size() != 3) throw std::invalid_argument("revolute axis needs 3 numbers");
            f.joint.type = JointType::Revolute;
            f.joint.axis = {ax[0], ax[1], ax[2]};
            f.joint.lo[0] = -3.2;
            f.joint.hi[0] = 3.2;
          } else {
            throw std::invalid_argument("bad joint spec: " + j);
          }
        }
        f.movable = kv.count("movable") && kv["movable"] == "1";
        f.obstacle = kv.count("obstacle") && kv["obstacle"] == "1";
        w.addFrame(std::move(f));
      } else if (head == "robot") {
        RobotKind kind = kindFromName(name);
        if (!kv.count("name") || !kv.count("base")) throw std::invalid_argument("robot needs name= and base=");
        int baseId = w.frameId(kv["base"]);
        Vec3 basePos = w.frames[baseId].rel.pos;  // scene mounts are world-rooted
        switch (kind) {
          case RobotKind::Crawler:
            robots::buildCrawler(w, kv["name"], basePos, kv.count("plane") ? kv["plane"] : "xz");
            break;
          case RobotKind::MobileBase: robots::buildMobileBase(w, kv["name"], basePos); break;
          case RobotKind::Arm: robots::buildArm(w, kv["name"], basePos); break;
        }
        w.robots.back().declaredBase = kv["base"];
      } else {
        throw std::invalid_argument("unknown declaration '" + head + "'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("scene line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return w;
}

inline std::string writeScene(const KinematicWorld& w) {
  std::ostringstream os;
  for (const auto& f : w.frames) {
    if (f.robot >= 0) continue;  // robot internals are rebuilt from the kind model
    os << "frame " << f.name;
    os << " parent=" << (f.parent < 0 ? std::string("world") : w.frames[f.parent].name);
    os << " pos=" << detail::fmtNum(f.rel.pos.x()) << "," << detail::fmtNum(f.rel.pos.y()) << ","
       << detail::fmtNum(f.rel.pos.z());
    os << " quat=" << detail::fmtNum(f.rel.rot.w()) << "," << detail::fmtNum(f.rel.rot.x()) << ","
       << detail::fmtNum(f.rel.rot.y()) << "," << detail::fmtNum(f.rel.rot.z());
    if (f.shape) {
      os << " shape=";
      switch (f.shape->kind) {
        case ShapeKind::Box:
          os << "box:" << detail::fmtNum(f.shape->dims.x()) << "," << detail::fmtNum(f.shape->dims.y())
             << "," << detail::fmtNum(f.shape->dims.z());
          break;
        case ShapeKind::Sphere: os << "sphere:" << detail::fmtNum(f.shape->dims.x()); break;
        case ShapeKind::Capsule:
          os << "capsule:" << detail::fmtNum(f.shape->dims.x()) << "," << detail::fmtNum(f.shape->dims.y());
          break;
      }
    }
    if (f.joint.type == JointType::Planar) os << " joint=planar";
    if (f.joint.type == JointType::Revolute)
      os << " joint=revolute:" << detail::fmtNum(f.joint.axis.x()) << "," << detail::fmtNum(f.joint.axis.y())
         << "," << detail::fmtNum(f.joint.axis.z());
    if (f.movable) os << " movable=1";
    if (f.obstacle) os << " obstacle=1";
    os << "\n";
  }
  for (const auto& r : w.robots) {
    os << "robot " << kindName(r.kind) << " name=" << r.name << " base="
       << (r.declaredBase.empty() ? w.frames[r.baseFrame].name : r.declaredBase);
    if (r.kind == RobotKind::Crawler) os << " plane=" << r.plane;
    os << "\n";
  }
  return os.str();
}

}  // namespace rhhlgp
