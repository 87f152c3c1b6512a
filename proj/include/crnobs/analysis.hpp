#pragma once

#include <optional>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"

namespace crnobs {

struct DetectabilityReport {
  bool detectable = false;
  int n = 0, m = 0, L = 0, p = 0;
  int dim_D = 0;
  int rank_C = 0;
  int rank_stacked = 0;
  // n - (m - L): number of independent outputs a detectable map needs.
  int required_outputs = 0;
  // Unit vector in D-perp intersected with ker C, present iff not detectable.
  std::optional<Eigen::VectorXd> witness;
};

/// Detectable iff the stacked matrix [D0; C] has rank n.
DetectabilityReport CheckDetectability(const StoichSubspace& sub, const OutputMap& c);
DetectabilityReport CheckDetectability(const ReactionNetwork& net, const OutputMap& c);

nlohmann::json ToJson(const DetectabilityReport& report);

struct Equilibrium {
  Eigen::VectorXd x_bar;
  double residual = 0;  // |f(x_bar)|
  Eigen::VectorXd class_tag;  // Q x_bar
};

struct EquilibriumOptions {
  double tol = 1e-10;
  int max_newton = 100;
  // Phase 1 integrates until |f| drops below this.
  double coarse_threshold = 1e-4;
  // Time budget of phase 1.
  double integration_budget = 1e5;
};

/// Phase 1 integrates x' = f(x) to |f| < coarse_threshold; phase 2 is damped
/// Newton on [(D0 D0^T)^-1 D0 f(x); Q (x - x0)] with step halving that keeps
/// every coordinate positive. Requires the no-boundary-equilibria assertion.
Equilibrium FindEquilibrium(const ReactionNetwork& net, const Eigen::VectorXd& x0,
                            const EquilibriumOptions& opts = {});

/// Sum over edges of |flux| |b_i - b_j|; the natural scale of f(x).
double GrossFlux(const ReactionNetwork& net, const Eigen::VectorXd& x);

/// z = Exp(rho(x_bar) + Q^T v). Throws EquilibriumCheckFailed when
/// |f(z)| > tol (1 + gross flux at z).
Eigen::VectorXd ShiftEquilibrium(const ReactionNetwork& net, const Eigen::VectorXd& x_bar,
                                 const Eigen::VectorXd& v, double tol = 1e-10);

}  // namespace crnobs
