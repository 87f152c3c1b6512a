#include "crnobs/analysis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "crnobs/errors.hpp"
#include "crnobs/linalg.hpp"
#include "crnobs/ode.hpp"

namespace crnobs {

DetectabilityReport CheckDetectability(const StoichSubspace& sub, const OutputMap& c) {
  const Eigen::MatrixXd& cm = c.matrix();
  const int n = static_cast<int>(sub.q.cols());
  if (cm.cols() != n) {
    throw DimensionMismatch("output map has " + std::to_string(cm.cols()) +
                            " columns, network has " + std::to_string(n) + " species");
  }
  DetectabilityReport r;
  r.n = n;
  r.m = sub.num_complexes;
  r.L = sub.num_linkage_classes;
  r.p = static_cast<int>(cm.rows());
  r.dim_D = static_cast<int>(sub.d0.rows());
  r.rank_C = NumericalRank(cm);
  r.required_outputs = n - r.dim_D;
  Eigen::MatrixXd stacked(sub.d0.rows() + cm.rows(), n);
  stacked << sub.d0, cm;
  r.rank_stacked = NumericalRank(stacked);
  r.detectable = r.rank_stacked == n;
  if (!r.detectable) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
    Eigen::VectorXd w = svd.matrixV().col(n - 1);
    w.normalize();
    NormalizeSign(w);
    r.witness = w;
  }
  return r;
}

DetectabilityReport CheckDetectability(const ReactionNetwork& net, const OutputMap& c) {
  return CheckDetectability(StoichBasis(net), c);
}

nlohmann::json ToJson(const DetectabilityReport& r) {
  nlohmann::json doc = {
      {"detectable", r.detectable},
      {"n", r.n},
      {"m", r.m},
      {"L", r.L},
      {"p", r.p},
      {"dim_D", r.dim_D},
      {"rank_C", r.rank_C},
      {"rank_stacked", r.rank_stacked},
      {"required_outputs", r.required_outputs},
      {"counting_check", r.dim_D + r.rank_C >= r.n},
  };
  if (r.witness) {
    doc["witness"] = std::vector<double>(r.witness->data(), r.witness->data() + r.witness->size());
  } else {
    doc["witness"] = nullptr;
  }
  return doc;
}

double GrossFlux(const ReactionNetwork& net, const Eigen::VectorXd& x) {
  const auto& b = net.complexes();
  double total = 0;
  for (const auto& e : net.edges()) {
    double m = e.rate;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      for (int p = 0; p < b(k, e.source); ++p) m *= x[k];
    }
    total += std::abs(m) * (b.col(e.target) - b.col(e.source)).cast<double>().norm();
  }
  return total;
}

namespace {

// Integrates x' = f(x) from x until |f| < threshold or the budget runs out.
Eigen::VectorXd Relax(const ReactionNetwork& net, const Eigen::VectorXd& x, double threshold,
                      double budget) {
  SimConfig cfg;
  cfg.t_end = budget;
  cfg.record_stride = budget;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  IntegrateHooks hooks;
  hooks.guarded.assign(x.size(), true);
  hooks.stop = [&](double, const Eigen::VectorXd& y) {
    return EvalF(net, y).norm() < threshold;
  };
  const Trajectory traj =
      Integrate([&](double, const Eigen::VectorXd& y) { return EvalF(net, y); }, x, cfg, hooks);
  return traj.final_state();
}

struct NewtonResult {
  bool converged = false;
  bool left_domain = false;
  Eigen::VectorXd x;
};

NewtonResult Newton(const ReactionNetwork& net, const StoichSubspace& sub,
                    const Eigen::VectorXd& x0, Eigen::VectorXd x,
                    const EquilibriumOptions& opts) {
  const Eigen::MatrixXd& d0 = sub.d0;
  const Eigen::MatrixXd& q = sub.q;
  const Eigen::MatrixXd lift = (d0 * d0.transpose()).ldlt().solve(d0);
  const Eigen::Index r = d0.rows();
  const Eigen::Index n = x.size();
  const Eigen::VectorXd target = q * x0;

  auto residual = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd g(n);
    g.head(r) = lift * EvalF(net, y);
    g.tail(n - r) = q * y - target;
    return g;
  };

  NewtonResult out;
  Eigen::VectorXd g = residual(x);
  for (int it = 0; it < opts.max_newton; ++it) {
    const double f_norm = EvalF(net, x).norm();
    const double class_err = (q * x - target).norm();
    if (f_norm <= opts.tol && class_err <= opts.tol) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd jac(n, n);
    jac.topRows(r) = lift * EvalJacobianF(net, x);
    jac.bottomRows(n - r) = q;
    const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-g);
    double lambda = 1.0;
    int halvings = 0;
    while (halvings < 60) {
      const Eigen::VectorXd trial = x + lambda * step;
      if ((trial.array() > 0).all()) {
        const Eigen::VectorXd g_trial = residual(trial);
        if (g_trial.allFinite() && (g_trial.norm() < g.norm() || lambda < 1e-3)) {
          x = trial;
          g = g_trial;
          break;
        }
      }
      lambda /= 2;
      ++halvings;
    }
    if (halvings == 60) {
      out.left_domain = true;
      break;
    }
  }
  out.x = x;
  return out;
}

}  // namespace

Equilibrium FindEquilibrium(const ReactionNetwork& net, const Eigen::VectorXd& x0,
                            const EquilibriumOptions& opts) {
  if (!net.no_boundary_equilibria_asserted()) {
    throw PreconditionError(
        "find_equilibrium requires the network to assert no boundary equilibria "
        "('assume no_boundary_equilibria')");
  }
  if (x0.size() != net.num_species()) throw DimensionMismatch("x0 has the wrong length");
  if (!(x0.array() > 0).all()) throw DomainError("x0 must be strictly positive");
  const StoichSubspace sub = StoichBasis(net);

  Eigen::VectorXd x = Relax(net, x0, opts.coarse_threshold, opts.integration_budget);
  NewtonResult res = Newton(net, sub, x0, x, opts);
  // Newton wandered off: integrate further and try once more from closer in.
  if (!res.converged) {
    x = Relax(net, x, opts.coarse_threshold * 1e-4, opts.integration_budget);
    res = Newton(net, sub, x0, x, opts);
  }
  if (!res.converged) {
    throw NoConvergence("equilibrium not found within " + std::to_string(opts.max_newton) +
                        " Newton iterations (|f| = " +
                        std::to_string(EvalF(net, res.x).norm()) + ")");
  }
  Equilibrium eq;
  eq.x_bar = res.x;
  eq.residual = EvalF(net, res.x).norm();
  eq.class_tag = sub.q * res.x;
  return eq;
}

Eigen::VectorXd ShiftEquilibrium(const ReactionNetwork& net, const Eigen::VectorXd& x_bar,
                                 const Eigen::VectorXd& v, double tol) {
  const StoichSubspace sub = StoichBasis(net);
  if (v.size() != sub.q.rows()) {
    throw DimensionMismatch("shift has " + std::to_string(v.size()) +
                            " coordinates, the complement of D has dimension " +
                            std::to_string(sub.q.rows()));
  }
  const Eigen::VectorXd z = ExpMap(Rho(x_bar) + sub.q.transpose() * v);
  const double f_norm = EvalF(net, z).norm();
  if (!(f_norm <= tol * (1 + GrossFlux(net, z)))) {
    throw EquilibriumCheckFailed("shifted point has |f| = " + std::to_string(f_norm) +
                                 "; x_bar is not an equilibrium of this network");
  }
  return z;
}

}  // namespace crnobs
