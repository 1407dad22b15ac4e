#include <catch2/catch_amalgamated.hpp>

#include "rhhlgp/motion.hpp"
#include "rhhlgp/nlp.hpp"

using namespace rhhlgp;

namespace {

std::shared_ptr<features::Linear> lin(FeatureKind kind, std::vector<int> steps,
                                      std::vector<double> coeffs, Eigen::VectorXd offset,
                                      double weight = 1.0) {
  auto f = std::make_shared<features::Linear>();
  f->kind = kind;
  f->tag = "lin";
  f->steps = std::move(steps);
  f->coeffs = std::move(coeffs);
  f->offset = std::move(offset);
  f->weight = weight;
  return f;
}

struct NanFeature final : Feature {
  int dim() const override { return 1; }
  void eval(const std::vector<Eigen::VectorXd>&, Eigen::VectorXd& r,
            std::vector<Eigen::MatrixXd>& J) const override {
    r.resize(1);
    r[0] = std::numeric_limits<double>::quiet_NaN();
    J.assign(1, Eigen::MatrixXd::Zero(1, 2));
  }
};

}  // namespace

TEST_CASE("unconstrained quadratic converges to the analytic minimum") {
  NlpProblem p;
  p.nSteps = 1;
  p.dof = 3;
  Eigen::Vector3d target{0.3, -1.2, 2.0};
  p.features.push_back(lin(FeatureKind::Cost, {0}, {1.0}, -target));
  SolverParams prm;
  auto out = solveAula(p, Eigen::VectorXd::Zero(3), prm);
  REQUIRE(out.feasible);
  REQUIRE(out.termination == Termination::Converged);
  REQUIRE(out.outerIters <= 2);
  REQUIRE((out.x - target).norm() < 1e-6);
}

TEST_CASE("equality constrained quadratic") {
  // min ||x||^2 s.t. x[0] - 1 = 0
  NlpProblem p;
  p.nSteps = 1;
  p.dof = 2;
  p.features.push_back(lin(FeatureKind::Cost, {0}, {1.0}, Eigen::Vector2d::Zero()));
  struct Selector final : Feature {
    int dim() const override { return 1; }
    void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
              std::vector<Eigen::MatrixXd>& J) const override {
      r.resize(1);
      r[0] = qs[0][0] - 1.0;
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(1, 2);
      j(0, 0) = 1.0;
      J.assign(1, j);
    }
  };
  auto sel = std::make_shared<Selector>();
  sel->kind = FeatureKind::Eq;
  sel->tag = "pin";
  sel->steps = {0};
  p.features.push_back(sel);
  auto out = solveAula(p, Eigen::VectorXd::Zero(2), SolverParams{});
  REQUIRE(out.feasible);
  REQUIRE(std::abs(out.x[0] - 1.0) < 1e-3);
  REQUIRE(std::abs(out.x[1]) < 1e-5);
}

TEST_CASE("inequality constrained quadratic") {
  // min ||x - 2||^2 s.t. x <= 1
  struct Bound final : Feature {
    int dim() const override { return 1; }
    void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
              std::vector<Eigen::MatrixXd>& J) const override {
      r.resize(1);
      r[0] = qs[0][0] - 1.0;
      J.assign(1, Eigen::MatrixXd::Ones(1, 1));
    }
  };
  NlpProblem p;
  p.nSteps = 1;
  p.dof = 1;
  Eigen::VectorXd two(1);
  two[0] = -2.0;
  p.features.push_back(lin(FeatureKind::Cost, {0}, {1.0}, two));
  auto b = std::make_shared<Bound>();
  b->kind = FeatureKind::Ineq;
  b->tag = "ub";
  b->steps = {0};
  p.features.push_back(b);
  auto out = solveAula(p, Eigen::VectorXd::Zero(1), SolverParams{});
  REQUIRE(out.feasible);
  REQUIRE(out.x[0] <= 1.0 + 1e-3);
  REQUIRE(out.x[0] > 0.9);
}

TEST_CASE("identical problem and start give bit-identical results") {
  NlpProblem p;
  p.nSteps = 3;
  p.dof = 4;
  for (int t = 0; t < 3; ++t)
    p.features.push_back(lin(FeatureKind::Cost, {t}, {1.0},
                             Eigen::VectorXd::Constant(4, -0.1 * (t + 1))));
  p.features.push_back(lin(FeatureKind::Cost, {0, 1}, {1.0, -1.0}, Eigen::VectorXd::Zero(4), 2.0));
  Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(12, -1, 1);
  auto a = solveAula(p, x0, SolverParams{});
  auto b = solveAula(p, x0, SolverParams{});
  REQUIRE(a.x.size() == b.x.size());
  for (int i = 0; i < a.x.size(); ++i) REQUIRE(a.x[i] == b.x[i]);
  REQUIRE(a.cost == b.cost);
}

TEST_CASE("non-finite residuals terminate as diverged") {
  NlpProblem p;
  p.nSteps = 1;
  p.dof = 2;
  auto f = std::make_shared<NanFeature>();
  f->kind = FeatureKind::Eq;
  f->tag = "nan";
  f->steps = {0};
  p.features.push_back(f);
  auto out = solveAula(p, Eigen::VectorXd::Zero(2), SolverParams{});
  REQUIRE(out.termination == Termination::Diverged);
  REQUIRE(!out.feasible);
}

TEST_CASE("duplicate feature doubles the residual vector") {
  NlpProblem p;
  p.nSteps = 1;
  p.dof = 2;
  auto f = lin(FeatureKind::Eq, {0}, {1.0}, Eigen::Vector2d{0.5, -0.5});
  p.features.push_back(f);
  auto once = evaluateProblem(p, Eigen::VectorXd::Zero(2), 1e-3, 1e-3);
  p.features.push_back(f);
  auto twice = evaluateProblem(p, Eigen::VectorXd::Zero(2), 1e-3, 1e-3);
  REQUIRE(twice.eq.size() == 2 * once.eq.size());
}
