#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <random>

#include "geometry.hpp"

namespace rhhlgp {

/// Constraint/cost feature evaluated on a handful of trajectory steps.
/// Residuals are least-squares terms for Cost, h(x)=0 targets for Eq and
/// g(x)<=0 values for Ineq.

enum class FeatureKind { Cost, Eq, Ineq };

struct Feature {
  FeatureKind kind = FeatureKind::Cost;
  std::string tag;
  double weight = 1.0;
  double tolOverride = -1.0;  // per-feature feasibility tolerance (raw residual), if > 0
  std::vector<int> steps;     // variable step indices read by eval, in call order

  virtual ~Feature() = default;
  virtual int dim() const = 0;
  /// qs[i] is the configuration at steps[i]; J[i] is d r / d qs[i] (dim x dof).
  virtual void eval(const std::vector<Eigen::VectorXd>& qs, Eigen::VectorXd& r,
                    std::vector<Eigen::MatrixXd>& J) const = 0;
};

struct NlpProblem {
  int nSteps = 0;
  int dof = 0;
  std::vector<std::shared_ptr<const Feature>> features;

  int nvars() const { return nSteps * dof; }
};

/// Raw (unweighted) feature evaluation over a stacked trajectory vector.
struct FeatureEval {
  double cost = 0;
  Eigen::VectorXd eq, ineq;
  Eigen::VectorXd eqTol, ineqTol;  // per-entry feasibility tolerances
  Eigen::SparseMatrix<double> eqJ, ineqJ;
  Eigen::VectorXd costGrad;
};

namespace detail {

inline void gatherSlices(const NlpProblem& p, const Eigen::VectorXd& x, const Feature& f,
                         std::vector<Eigen::VectorXd>& qs) {
  qs.clear();
  for (int s : f.steps) {
    if (s < 0 || s >= p.nSteps) throw std::logic_error("feature step index out of range");
    qs.push_back(x.segment(static_cast<Eigen::Index>(s) * p.dof, p.dof));
  }
}

}  // namespace detail

inline FeatureEval evaluateProblem(const NlpProblem& p, const Eigen::VectorXd& x, double defaultEqTol,
                                   double defaultIneqTol, bool withJacobians = false) {
  if (x.size() != p.nvars()) throw std::invalid_argument("evaluateProblem: x dimension mismatch");
  FeatureEval out;
  out.costGrad = Eigen::VectorXd::Zero(p.nvars());
  std::vector<Eigen::VectorXd> qs;
  std::vector<Eigen::VectorXd> eqs, ineqs, eqTols, ineqTols;
  std::vector<Eigen::Triplet<double>> eqT, ineqT;
  int eqRows = 0, ineqRows = 0;
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> J;
  for (const auto& f : p.features) {
    detail::gatherSlices(p, x, *f, qs);
    f->eval(qs, r, J);
    if (r.size() != f->dim()) throw std::logic_error("feature " + f->tag + ": dim mismatch");
    switch (f->kind) {
      case FeatureKind::Cost: {
        double w2 = f->weight * f->weight;
        out.cost += w2 * r.squaredNorm();
        for (size_t i = 0; i < f->steps.size(); ++i)
          out.costGrad.segment(static_cast<Eigen::Index>(f->steps[i]) * p.dof, p.dof) +=
              2.0 * w2 * J[i].transpose() * r;
        break;
      }
      case FeatureKind::Eq:
      case FeatureKind::Ineq: {
        bool isEq = f->kind == FeatureKind::Eq;
        auto& vals = isEq ? eqs : ineqs;
        auto& tols = isEq ? eqTols : ineqTols;
        auto& trips = isEq ? eqT : ineqT;
        int& rows = isEq ? eqRows : ineqRows;
        vals.push_back(r);
        double tol = f->tolOverride > 0 ? f->tolOverride : (isEq ? defaultEqTol : defaultIneqTol);
        tols.push_back(Eigen::VectorXd::Constant(r.size(), tol));
        if (withJacobians) {
          for (size_t i = 0; i < f->steps.size(); ++i)
            for (int rr = 0; rr < J[i].rows(); ++rr)
              for (int cc = 0; cc < J[i].cols(); ++cc)
                if (J[i](rr, cc) != 0.0)
                  trips.emplace_back(rows + rr, f->steps[i] * p.dof + cc, J[i](rr, cc));
        }
        rows += static_cast<int>(r.size());
        break;
      }
    }
  }
  auto stack = [](const std::vector<Eigen::VectorXd>& vs, int total) {
    Eigen::VectorXd v(total);
    int at = 0;
    for (const auto& x2 : vs) {
      v.segment(at, x2.size()) = x2;
      at += static_cast<int>(x2.size());
    }
    return v;
  };
  out.eq = stack(eqs, eqRows);
  out.ineq = stack(ineqs, ineqRows);
  out.eqTol = stack(eqTols, eqRows);
  out.ineqTol = stack(ineqTols, ineqRows);
  if (withJacobians) {
    out.eqJ.resize(eqRows, p.nvars());
    out.eqJ.setFromTriplets(eqT.begin(), eqT.end());
    out.ineqJ.resize(ineqRows, p.nvars());
    out.ineqJ.setFromTriplets(ineqT.begin(), ineqT.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmented-Lagrangian outer loop over damped Gauss-Newton inner steps.
// ---------------------------------------------------------------------------

struct SolverParams {
  double eqTol = 1e-3;
  double ineqTol = 1e-3;
  int maxOuter = 30;
  int maxInner = 50;
  double damping0 = 1e-2;
  double mu0 = 10.0;
  double muGrowth = 2.0;
  double muMax = 1e7;
  double noiseSigma = 1e-2;
  double stepTolerance = 1e-7;
};

enum class Termination { Converged, MaxIter, Diverged };

inline std::string terminationName(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIter: return "max-iter";
    case Termination::Diverged: return "diverged";
  }
  return "max-iter";
}

struct SolveOutcome {
  Eigen::VectorXd x;
  bool feasible = false;
  Termination termination = Termination::MaxIter;
  int outerIters = 0;
  int innerIters = 0;
  double cost = 0;
  double maxEq = 0;
  double maxIneq = 0;
};

namespace detail {

struct AulaState {
  Eigen::VectorXd kappa;   // eq multipliers (on weighted residuals)
  Eigen::VectorXd lambda;  // ineq multipliers
  double mu = 10.0;
};

struct AulaAssembly {
  double L = 0;
  Eigen::VectorXd grad;
  std::vector<Eigen::Triplet<double>> hessTriplets;
  Eigen::VectorXd eqRaw, ineqRaw, eqTol, ineqTol;
  bool finite = true;
};

inline AulaAssembly assembleAula(const NlpProblem& p, const Eigen::VectorXd& x, const AulaState& st,
                                 const SolverParams& prm, bool withDerivs) {
  AulaAssembly out;
  if (withDerivs) out.grad = Eigen::VectorXd::Zero(p.nvars());
  std::vector<Eigen::VectorXd> qs;
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> J;
  std::vector<double> eqRawV, ineqRawV, eqTolV, ineqTolV;
  int eqAt = 0, ineqAt = 0;
  auto addHessBlock = [&](int sa, int sb, const Eigen::MatrixXd& block) {
    int ra = sa * p.dof, cb = sb * p.dof;
    for (int i = 0; i < block.rows(); ++i)
      for (int j = 0; j < block.cols(); ++j)
        if (block(i, j) != 0.0) out.hessTriplets.emplace_back(ra + i, cb + j, block(i, j));
  };
  for (const auto& f : p.features) {
    gatherSlices(p, x, *f, qs);
    f->eval(qs, r, J);
    if (!r.allFinite()) {
      out.finite = false;
      return out;
    }
    double w = f->weight;
    switch (f->kind) {
      case FeatureKind::Cost: {
        out.L += w * w * r.squaredNorm();
        if (withDerivs) {
          for (size_t i = 0; i < f->steps.size(); ++i) {
            out.grad.segment(static_cast<Eigen::Index>(f->steps[i]) * p.dof, p.dof) +=
                2.0 * w * w * J[i].transpose() * r;
            for (size_t j = 0; j < f->steps.size(); ++j)
              addHessBlock(f->steps[i], f->steps[j], 2.0 * w * w * J[i].transpose() * J[j]);
          }
        }
        break;
      }
      case FeatureKind::Eq: {
        Eigen::VectorXd hw = w * r;
        for (int i = 0; i < r.size(); ++i) {
          double kap = st.kappa[eqAt + i];
          out.L += kap * hw[i] + st.mu * hw[i] * hw[i];
          eqRawV.push_back(std::abs(r[i]));
          eqTolV.push_back(f->tolOverride > 0 ? f->tolOverride : prm.eqTol);
        }
        if (withDerivs) {
          Eigen::VectorXd coeff = st.kappa.segment(eqAt, r.size()) + 2.0 * st.mu * hw;
          for (size_t i = 0; i < f->steps.size(); ++i) {
            out.grad.segment(static_cast<Eigen::Index>(f->steps[i]) * p.dof, p.dof) +=
                w * J[i].transpose() * coeff;
            for (size_t j = 0; j < f->steps.size(); ++j)
              addHessBlock(f->steps[i], f->steps[j], 2.0 * st.mu * w * w * J[i].transpose() * J[j]);
          }
        }
        eqAt += static_cast<int>(r.size());
        break;
      }
      case FeatureKind::Ineq: {
        Eigen::VectorXd gw = w * r;
        Eigen::VectorXd act = Eigen::VectorXd::Zero(r.size());
        for (int i = 0; i < r.size(); ++i) {
          double lam = st.lambda[ineqAt + i];
          bool active = gw[i] > 0 || lam > 0;
          if (active) act[i] = 1.0;
          out.L += lam * gw[i] + (active ? st.mu * gw[i] * gw[i] : 0.0);
          ineqRawV.push_back(r[i]);
          ineqTolV.push_back(f->tolOverride > 0 ? f->tolOverride : prm.ineqTol);
        }
        if (withDerivs) {
          Eigen::VectorXd coeff =
              st.lambda.segment(ineqAt, r.size()) + 2.0 * st.mu * gw.cwiseProduct(act);
          for (size_t i = 0; i < f->steps.size(); ++i) {
            out.grad.segment(static_cast<Eigen::Index>(f->steps[i]) * p.dof, p.dof) +=
                w * J[i].transpose() * coeff;
            Eigen::MatrixXd Jact = act.asDiagonal() * J[i];
            for (size_t j = 0; j < f->steps.size(); ++j)
              addHessBlock(f->steps[i], f->steps[j],
                           2.0 * st.mu * w * w * Jact.transpose() * (act.asDiagonal() * J[j]));
          }
        }
        ineqAt += static_cast<int>(r.size());
        break;
      }
    }
  }
  out.eqRaw = Eigen::Map<Eigen::VectorXd>(eqRawV.data(), eqRawV.size());
  out.ineqRaw = Eigen::Map<Eigen::VectorXd>(ineqRawV.data(), ineqRawV.size());
  out.eqTol = Eigen::Map<Eigen::VectorXd>(eqTolV.data(), eqTolV.size());
  out.ineqTol = Eigen::Map<Eigen::VectorXd>(ineqTolV.data(), ineqTolV.size());
  out.finite = std::isfinite(out.L);
  return out;
}

inline int countResiduals(const NlpProblem& p, FeatureKind kind) {
  int n = 0;
  for (const auto& f : p.features)
    if (f->kind == kind) n += f->dim();
  return n;
}

}  // namespace detail

/// Deterministic AuLa/Gauss-Newton solve from a given start point.
inline SolveOutcome solveAula(const NlpProblem& p, const Eigen::VectorXd& xInit, const SolverParams& prm) {
  SolveOutcome res;
  Eigen::VectorXd x = xInit;
  detail::AulaState st;
  st.mu = prm.mu0;
  st.kappa = Eigen::VectorXd::Zero(detail::countResiduals(p, FeatureKind::Eq));
  st.lambda = Eigen::VectorXd::Zero(detail::countResiduals(p, FeatureKind::Ineq));

  double damping = prm.damping0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool structureAnalyzed = false;
  Eigen::SparseMatrix<double> H(p.nvars(), p.nvars());

  auto feasibleNow = [&](const detail::AulaAssembly& a) {
    bool ok = true;
    for (int i = 0; i < a.eqRaw.size(); ++i) ok = ok && a.eqRaw[i] <= a.eqTol[i];
    for (int i = 0; i < a.ineqRaw.size(); ++i) ok = ok && a.ineqRaw[i] <= a.ineqTol[i];
    return ok;
  };

  for (int outer = 0; outer < prm.maxOuter; ++outer) {
    res.outerIters = outer + 1;
    bool innerConverged = false;
    for (int inner = 0; inner < prm.maxInner; ++inner) {
      res.innerIters++;
      auto a = detail::assembleAula(p, x, st, prm, true);
      if (!a.finite || !a.grad.allFinite()) {
        res.termination = Termination::Diverged;
        res.x = x;
        return res;
      }
      // (H + damping I) dx = -grad
      std::vector<Eigen::Triplet<double>>& T = a.hessTriplets;
      for (int i = 0; i < p.nvars(); ++i) T.emplace_back(i, i, damping);
      H.setZero();
      H.setFromTriplets(T.begin(), T.end());
      if (!structureAnalyzed) {
        ldlt.analyzePattern(H);
        structureAnalyzed = true;
      }
      ldlt.factorize(H);
      Eigen::VectorXd dx;
      if (ldlt.info() != Eigen::Success) {
        damping = std::max(damping * 10, 1e-6);
        continue;
      }
      dx = ldlt.solve(-a.grad);
      if (!dx.allFinite()) {
        res.termination = Termination::Diverged;
        res.x = x;
        return res;
      }
      double step = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 12; ++ls) {
        Eigen::VectorXd xTrial = x + step * dx;
        auto trial = detail::assembleAula(p, xTrial, st, prm, false);
        if (trial.finite && trial.L <= a.L - 1e-12) {
          x = xTrial;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (accepted) {
        damping = std::max(damping * 0.5, 1e-8);
        if ((step * dx).lpNorm<Eigen::Infinity>() < prm.stepTolerance * (1.0 + x.lpNorm<Eigen::Infinity>())) {
          innerConverged = true;
          break;
        }
      } else {
        damping *= 10;
        if (damping > 1e9) {
          innerConverged = true;
          break;
        }
      }
    }

    auto a = detail::assembleAula(p, x, st, prm, false);
    if (!a.finite) {
      res.termination = Termination::Diverged;
      res.x = x;
      return res;
    }
    res.maxEq = a.eqRaw.size() ? a.eqRaw.maxCoeff() : 0.0;
    res.maxIneq = a.ineqRaw.size() ? std::max(0.0, a.ineqRaw.maxCoeff()) : 0.0;
    if (feasibleNow(a) && innerConverged) {
      res.feasible = true;
      res.termination = Termination::Converged;
      break;
    }
    // multiplier and penalty updates on weighted residuals
    int eqAt = 0, ineqAt = 0;
    std::vector<Eigen::VectorXd> qs;
    Eigen::VectorXd r;
    std::vector<Eigen::MatrixXd> J;
    for (const auto& f : p.features) {
      if (f->kind == FeatureKind::Cost) continue;
      detail::gatherSlices(p, x, *f, qs);
      f->eval(qs, r, J);
      if (f->kind == FeatureKind::Eq) {
        for (int i = 0; i < r.size(); ++i) st.kappa[eqAt + i] += 2.0 * st.mu * f->weight * r[i];
        eqAt += static_cast<int>(r.size());
      } else {
        for (int i = 0; i < r.size(); ++i)
          st.lambda[ineqAt + i] = std::max(0.0, st.lambda[ineqAt + i] + 2.0 * st.mu * f->weight * r[i]);
        ineqAt += static_cast<int>(r.size());
      }
    }
    st.mu = std::min(st.mu * prm.muGrowth, prm.muMax);
  }

  // final report uses raw residuals and the pure cost
  auto fin = evaluateProblem(p, x, prm.eqTol, prm.ineqTol, false);
  res.cost = fin.cost;
  res.maxEq = fin.eq.size() ? fin.eq.cwiseAbs().maxCoeff() : 0.0;
  res.maxIneq = fin.ineq.size() ? std::max(0.0, fin.ineq.maxCoeff()) : 0.0;
  bool feas = true;
  for (int i = 0; i < fin.eq.size(); ++i) feas = feas && std::abs(fin.eq[i]) <= fin.eqTol[i];
  for (int i = 0; i < fin.ineq.size(); ++i) feas = feas && fin.ineq[i] <= fin.ineqTol[i];
  res.feasible = feas && res.termination != Termination::Diverged;
  if (res.feasible && res.termination == Termination::MaxIter) res.termination = Termination::Converged;
  res.x = x;
  return res;
}

}  // namespace rhhlgp
