#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "rhhlgp/kinematics.hpp"

using namespace rhhlgp;

namespace {

// Independent FK oracle: 4x4 homogeneous matrix products over the same frame
// data, sidestepping the library's quaternion composition path.
Eigen::Matrix4d homogeneous(const Transform& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = t.rot.toRotationMatrix();
  m.topRightCorner<3, 1>() = t.pos;
  return m;
}

std::vector<Eigen::Matrix4d> oracleFk(const KinematicWorld& w, const Eigen::VectorXd& q) {
  std::vector<Eigen::Matrix4d> out(w.frames.size(), Eigen::Matrix4d::Identity());
  for (size_t i = 0; i < w.frames.size(); ++i) {
    const Frame& f = w.frames[i];
    if (f.movable) {
      auto att = w.attachments.find(f.name);
      if (att != w.attachments.end())
        out[i] = out[att->second.holderEe] * homogeneous(att->second.rel);
      else
        out[i] = homogeneous(w.config.objectPoses.at(f.name));
      continue;
    }
    Eigen::Matrix4d parent = f.parent < 0 ? Eigen::Matrix4d::Identity() : out[f.parent];
    Eigen::Matrix4d joint = Eigen::Matrix4d::Identity();
    if (f.joint.type == JointType::Revolute)
      joint.topLeftCorner<3, 3>() =
          Eigen::AngleAxisd(q[f.qIndex], f.joint.axis.normalized()).toRotationMatrix();
    if (f.joint.type == JointType::Planar) joint.topRightCorner<3, 1>() = Vec3{q[f.qIndex], q[f.qIndex + 1], 0};
    out[i] = parent * homogeneous(f.rel) * joint;
  }
  return out;
}

KinematicWorld climbTestWorld() {
  KinematicWorld w;
  Frame tile;
  tile.name = "tileB";
  tile.rel = makePose({-0.5, 0, -0.05}, Quat::Identity());
  tile.shape = Shape::box(1.0, 0.8, 0.1);
  w.addFrame(tile);
  Frame s1;
  s1.name = "s1";
  s1.rel = makePose({1.0, 0, 0.95}, Quat::Identity());
  s1.shape = Shape::box(0.6, 0.8, 0.1);
  w.addFrame(s1);
  Frame target;
  target.name = "target";
  target.rel = makePose({1.0, 0, 1.06}, Quat::Identity());
  target.shape = Shape::box(0.1, 0.1, 0.1);
  target.movable = true;
  w.addFrame(target);
  robots::buildCrawler(w, "c1", {-0.1, 0, 0}, "xz");
  robots::buildCrawler(w, "c2", {-3.0, 0, 0}, "xz");
  w.supports["c1"] = {w.robot("c1").endEffectors[0], "tileB"};
  w.supports["c2"] = {w.robot("c2").endEffectors[0], "tileB"};
  return w;
}

GroundAction mkAction(const std::string& name, GeomTag tag, std::vector<std::string> binding) {
  GroundAction a;
  a.name = name;
  a.tag = tag;
  a.binding = std::move(binding);
  a.key = name + "(...)";
  return a;
}

}  // namespace

TEST_CASE("zero configuration extends the crawler to its reach") {
  KinematicWorld w;
  robots::buildCrawler(w, "c1", {0, 0, 0}, "xz");
  auto fk = w.fkCurrent();
  int head = w.robot("c1").endEffectors[1];
  REQUIRE((fk.pose[head].pos - Vec3{1.4, 0, 0}).norm() < 1e-12);
  REQUIRE(w.reach("c1") == Catch::Approx(1.4));
  REQUIRE(w.robot("c1").dof == 10);
}

TEST_CASE("single revolute joint analytic case") {
  KinematicWorld w;
  Frame rot;
  rot.name = "rot";
  rot.joint.type = JointType::Revolute;
  rot.joint.axis = {0, -1, 0};
  rot.joint.lo[0] = -3.2;
  rot.joint.hi[0] = 3.2;
  w.addFrame(rot);
  Frame tip;
  tip.name = "tip";
  tip.parent = 0;
  tip.rel = makePose({1, 0, 0}, Quat::Identity());
  w.addFrame(tip);
  Eigen::VectorXd q(1);
  q[0] = M_PI / 2;
  auto fk = w.fk(q);
  REQUIRE((fk.pose[w.frameId("tip")].pos - Vec3{0, 0, 1}).norm() < 1e-12);
  Quat expect(Eigen::AngleAxisd(M_PI / 2, Vec3{0, -1, 0}));
  REQUIRE(fk.pose[w.frameId("tip")].rot.angularDistance(expect) < 1e-12);
}

TEST_CASE("fk matches the homogeneous-matrix oracle on random configurations") {
  KinematicWorld w = climbTestWorld();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(w.totalDof);
    for (int i = 0; i < q.size(); ++i) q[i] = u(rng);
    auto fk = w.fk(q);
    auto oracle = oracleFk(w, q);
    for (size_t i = 0; i < w.frames.size(); ++i) {
      REQUIRE((fk.pose[i].pos - oracle[i].topRightCorner<3, 1>()).norm() < 1e-9);
      REQUIRE((fk.pose[i].rot.toRotationMatrix() - oracle[i].topLeftCorner<3, 3>()).norm() < 1e-9);
    }
  }
}

TEST_CASE("position jacobians match central finite differences") {
  KinematicWorld w = climbTestWorld();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd q(w.totalDof);
    for (int i = 0; i < q.size(); ++i) q[i] = u(rng);
    int frame = w.robot(trial % 2 ? "c1" : "c2").endEffectors[trial % 2];
    auto fk = w.fk(q);
    Eigen::Matrix3Xd J = w.positionJacobian(frame, fk.pose[frame].pos, fk);
    for (int d = 0; d < w.totalDof; ++d) {
      Eigen::VectorXd qp = q, qm = q;
      qp[d] += h;
      qm[d] -= h;
      Vec3 fd = (w.fk(qp).pose[frame].pos - w.fk(qm).pose[frame].pos) / (2 * h);
      double scale = std::max(1.0, fd.norm());
      REQUIRE((J.col(d) - fd).norm() / scale < 1e-4);
      ++checked;
    }
  }
  REQUIRE(checked > 0);
}

TEST_CASE("mode switches preserve every frame pose at the switch instant") {
  KinematicWorld w = climbTestWorld();
  auto poseSnapshot = [](const KinematicWorld& world) {
    auto fk = world.fkCurrent();
    return fk.pose;
  };
  auto expectContinuity = [&](const KinematicWorld& before, const KinematicWorld& after) {
    auto pb = poseSnapshot(before);
    auto pa = poseSnapshot(after);
    REQUIRE(pb.size() == pa.size());
    for (size_t i = 0; i < pb.size(); ++i) REQUIRE((pb[i].pos - pa[i].pos).norm() < 1e-9);
  };

  auto pick = mkAction("pick", GeomTag::Pick, {"c1", "target", "tileB", "s1"});
  auto place = mkAction("place", GeomTag::Place, {"c1", "target", "s1", "tileB"});
  auto connect = mkAction("connect", GeomTag::Connect, {"c1", "c2", "tileB", "tileB"});
  auto disconnect = mkAction("disconnect", GeomTag::Disconnect, {"c1", "c2", "tileB"});

  SECTION("pick then place restores the object pose") {
    Vec3 before = w.config.objectPoses.at("target").pos;
    auto w1 = w.applyModeSwitch(pick);
    expectContinuity(w, w1);
    REQUIRE(w1.attachments.count("target") == 1);
    auto w2 = w1.applyModeSwitch(place);
    expectContinuity(w1, w2);
    REQUIRE((w2.config.objectPoses.at("target").pos - before).norm() < 1e-9);
  }
  SECTION("picking an attached object is an error") {
    auto w1 = w.applyModeSwitch(pick);
    REQUIRE_THROWS_AS(w1.applyModeSwitch(pick), std::logic_error);
  }
  SECTION("connect merges assemblies: 14 articulated joints, doubled reach") {
    auto w1 = w.applyModeSwitch(connect);
    expectContinuity(w, w1);
    REQUIRE(w1.articulatedJointCount("c1") == 14);
    REQUIRE(w1.reach("c1") == Catch::Approx(2.8));
    REQUIRE(w1.assemblyOf("c1").size() == 2);
    REQUIRE(w1.supports.count("c2") == 0);  // second module lifts off
  }
  SECTION("disconnect undoes connect on the attachment structure") {
    auto w1 = w.applyModeSwitch(connect);
    auto w2 = w1.applyModeSwitch(disconnect);
    REQUIRE(w2.couplings.empty());
    REQUIRE(w2.assemblyOf("c1").size() == 1);
    REQUIRE(w2.supports.count("c2") == 1);
    REQUIRE(w2.supports.at("c2").support == "tileB");
  }
  SECTION("disconnecting unconnected robots is an error") {
    REQUIRE_THROWS_AS(w.applyModeSwitch(disconnect), std::logic_error);
  }
  SECTION("step is not a mode switch") {
    auto step = mkAction("step", GeomTag::Step, {"c1", "tileB", "s1"});
    REQUIRE_THROWS_AS(w.applyModeSwitch(step), std::logic_error);
    auto w1 = w.applyAction(step);  // support flips to the other end-effector
    REQUIRE(w1.supports.at("c1").support == "s1");
    REQUIRE(w1.supports.at("c1").eeFrame == w.robot("c1").endEffectors[1]);
  }
}

TEST_CASE("reach is structural") {
  KinematicWorld w = climbTestWorld();
  double r0 = w.reach("c1");
  Eigen::VectorXd q = Eigen::VectorXd::Random(w.totalDof);
  w.setJointConfiguration(q);
  REQUIRE(w.reach("c1") == r0);

  KinematicWorld arm;
  robots::buildArm(arm, "a1", {0, 0, 0.5});
  REQUIRE(arm.reach("a1") == Catch::Approx(7 * robots::kArmLinkLength));
  REQUIRE(arm.robot("a1").dof == 7);
}

TEST_CASE("support distance") {
  KinematicWorld w = climbTestWorld();
  SECTION("identical frames give zero") { REQUIRE(w.supportDistance("s1", "s1") == 0.0); }
  SECTION("frame without shape is an error") {
    REQUIRE_THROWS_AS(w.supportDistance("c1_mount", "s1"), std::invalid_argument);
  }
  SECTION("tile to stair distance") {
    // tileB near edge (0,*,0) to s1 near corner (0.7,*,0.9)
    double d = w.supportDistance("tileB", "s1");
    REQUIRE(d == Catch::Approx(std::sqrt(0.7 * 0.7 + 0.9 * 0.9)).epsilon(1e-9));
  }
}

TEST_CASE("scene file round trip") {
  const char* scene = R"(frame tileA parent=world pos=-2.5,0,-0.05 quat=1,0,0,0 shape=box:1,0.8,0.1
frame s1 parent=world pos=1,0,0.95 quat=1,0,0,0 shape=box:0.6,0.8,0.1
frame target parent=world pos=1,0,1.06 quat=1,0,0,0 shape=box:0.1,0.1,0.1 movable=1
frame wall parent=world pos=3,0,0.25 quat=1,0,0,0 shape=box:0.1,0.8,0.5 obstacle=1
robot crawler name=c1 base=tileA plane=xz
)";
  KinematicWorld w = parseScene(scene);
  REQUIRE(w.isRobot("c1"));
  REQUIRE(w.frames[w.frameId("wall")].obstacle);
  REQUIRE(w.frames[w.frameId("target")].movable);
  std::string out = writeScene(w);
  KinematicWorld w2 = parseScene(out);
  REQUIRE(writeScene(w2) == out);
  REQUIRE(w2.totalDof == w.totalDof);
}

TEST_CASE("mobile base and mounting") {
  KinematicWorld w;
  Frame floor;
  floor.name = "ground";
  floor.rel = makePose({0, 0, -0.05}, Quat::Identity());
  floor.shape = Shape::box(10, 10, 0.1);
  w.addFrame(floor);
  robots::buildMobileBase(w, "mb", {1.0, 0.5, 0});
  robots::buildCrawler(w, "cr", {0, 0, 0}, "xy");
  w.supports["cr"] = {w.robot("cr").endEffectors[0], "ground"};
  REQUIRE(w.robot("mb").dof == 2);

  auto connect = mkAction("mount", GeomTag::Connect, {"cr", "mb", "ground", "ground"});
  auto w1 = w.applyAction(connect);
  REQUIRE(w1.couplings.size() == 1);
  REQUIRE(w1.supports.count("cr") == 0);
  REQUIRE(w1.assemblyHasMobileBase("cr"));
  // the crawler's free end (tail) remains the assembly manipulator
  REQUIRE(w1.assemblyManipEe("cr") == w.robot("cr").endEffectors[0]);

  auto disconnect = mkAction("dismount", GeomTag::Disconnect, {"cr", "mb", "ground"});
  auto w2 = w1.applyAction(disconnect);
  REQUIRE(w2.couplings.empty());
  REQUIRE(w2.supports.count("cr") == 1);
}
