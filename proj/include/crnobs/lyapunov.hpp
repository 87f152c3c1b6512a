#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"

namespace crnobs {

/// Everything the entropy-like function V is anchored to.
struct LyapunovContext {
  ReactionNetwork net;
  StoichSubspace sub;
  Eigen::VectorXd x_bar;
  std::optional<OutputMap> c;

  /// Validates x_bar > 0 and |f(x_bar)| <= tol (1 + gross flux).
  static LyapunovContext Make(const ReactionNetwork& net, const Eigen::VectorXd& x_bar,
                              std::optional<OutputMap> c = std::nullopt, double tol = 1e-8);

  const OutputMap& output() const;
};

/// g(r) = r ln r + 1 - r, g(0) = 1.
double EntropyG(double r);

/// V(z) = sum x_bar_i g(z_i / x_bar_i) on the closed nonnegative orthant.
double V(const LyapunovContext& ctx, const Eigen::VectorXd& z);

/// rho(z) - rho(x_bar).
Eigen::VectorXd GradV(const LyapunovContext& ctx, const Eigen::VectorXd& z);

/// Piecewise profile of the upper bound: (1-a)ln(1-a)+a below 1,
/// (1+a)ln(1+a)-a+2(1-ln 2) above.
double UpperProfile(double a);
/// w(a) = (1+a)ln(1+a) - a.
double LowerProfile(double a);

/// nu2(r) = n max(x_bar) v(r / min(x_bar)); V(z) <= nu2(|z - x_bar|).
double NuUpper(const LyapunovContext& ctx, double r);
/// nu1 nests min{F(c/2), alpha_k(c/2)} over coordinates with
/// alpha_k(r) = x_bar_k w(r / x_bar_k); V(z) >= nu1(|z - x_bar|).
double NuLower(const LyapunovContext& ctx, double r);

using KFunction = std::function<double(double)>;

/// alpha3(c) = min{alpha1(c/2), alpha2(c/2)}, so alpha1(a) + alpha2(b) >= alpha3(|(a, b)|).
double CombineKinf(const KFunction& alpha1, const KFunction& alpha2, double c);

/// (ln(1 + w/s))^2 / (2^(n-1) |D#|^2) with |D#| = 1 / sigma_min(D).
/// Throws RankDeficient when D does not have full column rank.
double AlphaLower(const Eigen::MatrixXd& d, double s, double w);

/// <rho(z) - rho(x_bar), f(z)>, never positive.
double Dissipation(const LyapunovContext& ctx, const Eigen::VectorXd& z);

/// coeff V(x) + V(x - eps).
double SeparationW(const LyapunovContext& ctx, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& eps, double coeff);

/// Constants of the ISS estimate for the main (or weighted) observer.
struct IssConstants {
  double theta = 0;
  double A = 0;    // min sqrt(w_i) h_i(x_bar) / 2
  double c_L = 0;  // Lipschitz constant of ln on [A, inf)
  double c2 = 0;   // min w_i h_i(x_bar)
  double c3 = 0;   // 2 c_L / theta, gain of gamma(r) = c3 r^2
};

IssConstants MainIssConstants(const LyapunovContext& ctx, double theta,
                              const std::optional<Eigen::VectorXd>& weights = std::nullopt);

/// u with |u_k - h_k(x_bar)| <= theta/2 h_k(x_bar) for every k.
bool InInputSet(const LyapunovContext& ctx, double theta, const Eigen::VectorXd& u);

/// f(z) + C^T W (u - h(z)); W = I when absent.
Eigen::VectorXd MainIssField(const LyapunovContext& ctx, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& u,
                             const std::optional<Eigen::VectorXd>& weights = std::nullopt);
/// f(z) + C^T (u - H(z)).
Eigen::VectorXd LogIssField(const LyapunovContext& ctx, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& u);

/// A constant c with grad V . f*(z, u) <= c for all z > 0, u in [0, u_max]^p:
/// c = p max{u_max h_max + 1/e + h_max, 2 c_L max(u_max, max h_i(x_bar))^2},
/// h_max = max |ln h_i(x_bar)|, c_L = 1 / min(1, min h_i(x_bar)).
double BoundedInputConstant(const LyapunovContext& ctx, double u_max);

/// Per-coordinate bound b_i with V(z) <= level implying 0 <= z_i <= b_i.
Eigen::VectorXd SublevelBound(const LyapunovContext& ctx, double level);

/// Floors eps_k for the log observer: while z stays in (0, b]^n and |u_i| <= u_bound,
/// the k-th field component is positive below 2 eps_k, so z_k(t) > eps_k.
/// Coordinates absent from every output get eps_k = 0.
Eigen::VectorXd LogObserverFloor(const ReactionNetwork& net, const OutputMap& c,
                                 const Eigen::VectorXd& z0, double u_bound, double b);

}  // namespace crnobs
