#include "crnobs/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crnobs/analysis.hpp"
#include "crnobs/errors.hpp"

namespace crnobs {

LyapunovContext LyapunovContext::Make(const ReactionNetwork& net, const Eigen::VectorXd& x_bar,
                                      std::optional<OutputMap> c, double tol) {
  if (x_bar.size() != net.num_species()) throw DimensionMismatch("x_bar has the wrong length");
  if (!(x_bar.array() > 0).all()) throw DomainError("x_bar must be strictly positive");
  const double f_norm = EvalF(net, x_bar).norm();
  if (!(f_norm <= tol * (1 + GrossFlux(net, x_bar)))) {
    throw EquilibriumCheckFailed("x_bar is not an equilibrium: |f(x_bar)| = " +
                                 std::to_string(f_norm));
  }
  if (c && c->num_species() != net.num_species()) {
    throw DimensionMismatch("output map does not match the network");
  }
  return LyapunovContext{net, StoichBasis(net), x_bar, std::move(c)};
}

const OutputMap& LyapunovContext::output() const {
  if (!c) throw PreconditionError("this operation needs an output map in the context");
  return *c;
}

double EntropyG(double r) {
  if (r == 0) return 1.0;
  return r * std::log(r) + 1 - r;
}

double V(const LyapunovContext& ctx, const Eigen::VectorXd& z) {
  if (z.size() != ctx.x_bar.size()) throw DimensionMismatch("z has the wrong length");
  double v = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] < 0) throw DomainError("V is defined on z >= 0", static_cast<int>(i));
    v += ctx.x_bar[i] * EntropyG(z[i] / ctx.x_bar[i]);
  }
  return v;
}

Eigen::VectorXd GradV(const LyapunovContext& ctx, const Eigen::VectorXd& z) {
  return Rho(z) - Rho(ctx.x_bar);
}

double UpperProfile(double a) {
  if (a < 1) return (1 - a) * std::log1p(-a) + a;
  if (a == 1) return 1.0;
  return (1 + a) * std::log1p(a) - a + 2 * (1 - std::log(2.0));
}

double LowerProfile(double a) { return (1 + a) * std::log1p(a) - a; }

double NuUpper(const LyapunovContext& ctx, double r) {
  const double n = static_cast<double>(ctx.x_bar.size());
  return n * ctx.x_bar.maxCoeff() * UpperProfile(r / ctx.x_bar.minCoeff());
}

double NuLower(const LyapunovContext& ctx, double r) {
  const Eigen::VectorXd& xb = ctx.x_bar;
  // F_1 = alpha_1, F_k(c) = min(F_{k-1}(c/2), alpha_k(c/2)), unrolled:
  // coordinate k > 0 is reached at argument r / 2^(n-k), coordinate 0 at r / 2^(n-1).
  const Eigen::Index n = xb.size();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double shrink = std::ldexp(1.0, -static_cast<int>(k == 0 ? n - 1 : n - k));
    best = std::min(best, xb[k] * LowerProfile(r * shrink / xb[k]));
  }
  return best;
}

double CombineKinf(const KFunction& alpha1, const KFunction& alpha2, double c) {
  return std::min(alpha1(c / 2), alpha2(c / 2));
}

double AlphaLower(const Eigen::MatrixXd& d, double s, double w) {
  const Eigen::Index n = d.cols();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const auto& sv = svd.singularValues();
  if (sv.size() < n || sv(n - 1) <= 1e-9 * sv(0)) {
    throw RankDeficient("stacked matrix has rank below n = " + std::to_string(n));
  }
  const double pinv_norm = 1.0 / sv(n - 1);
  const double l = std::log1p(w / s);
  return l * l / (std::ldexp(1.0, static_cast<int>(n - 1)) * pinv_norm * pinv_norm);
}

double Dissipation(const LyapunovContext& ctx, const Eigen::VectorXd& z) {
  return GradV(ctx, z).dot(EvalF(ctx.net, z));
}

double SeparationW(const LyapunovContext& ctx, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& eps, double coeff) {
  const Eigen::VectorXd diff = x - eps;
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    if (diff[i] < 0) throw DomainError("x - eps leaves the nonnegative orthant", static_cast<int>(i));
  }
  return coeff * V(ctx, x) + V(ctx, diff);
}

IssConstants MainIssConstants(const LyapunovContext& ctx, double theta,
                              const std::optional<Eigen::VectorXd>& weights) {
  if (!(theta > 0 && theta < 1)) throw PreconditionError("theta must lie in (0, 1)");
  const Eigen::VectorXd h_bar = EvalH(ctx.output(), ctx.x_bar);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(h_bar.size());
  if (weights) {
    if (weights->size() != h_bar.size() || !(weights->array() > 0).all()) {
      throw PreconditionError("weights must be p positive numbers");
    }
    w = *weights;
  }
  IssConstants k;
  k.theta = theta;
  k.A = (w.array().sqrt() * h_bar.array()).minCoeff() / 2;
  k.c_L = 1 / k.A;
  k.c2 = (w.array() * h_bar.array()).minCoeff();
  k.c3 = 2 * k.c_L / theta;
  return k;
}

bool InInputSet(const LyapunovContext& ctx, double theta, const Eigen::VectorXd& u) {
  const Eigen::VectorXd h_bar = EvalH(ctx.output(), ctx.x_bar);
  if (u.size() != h_bar.size()) throw DimensionMismatch("u has the wrong length");
  return ((u - h_bar).array().abs() <= theta / 2 * h_bar.array()).all();
}

Eigen::VectorXd MainIssField(const LyapunovContext& ctx, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& u,
                             const std::optional<Eigen::VectorXd>& weights) {
  const OutputMap& c = ctx.output();
  Eigen::VectorXd r = u - EvalH(c, z);
  if (weights) r = weights->cwiseProduct(r);
  return EvalF(ctx.net, z) + c.matrix().transpose() * r;
}

Eigen::VectorXd LogIssField(const LyapunovContext& ctx, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& u) {
  const OutputMap& c = ctx.output();
  return EvalF(ctx.net, z) + c.matrix().transpose() * (u - EvalHLog(c, z));
}

double BoundedInputConstant(const LyapunovContext& ctx, double u_max) {
  if (u_max < 0) throw PreconditionError("u_max must be nonnegative");
  const Eigen::VectorXd h_bar = EvalH(ctx.output(), ctx.x_bar);
  const double p = static_cast<double>(h_bar.size());
  const double h_max = h_bar.array().log().abs().maxCoeff();
  const double c_l = 1 / std::min(1.0, h_bar.minCoeff());
  const double big = std::max(u_max, h_bar.maxCoeff());
  const double low_branch = u_max * h_max + 1 / std::exp(1.0) + h_max;
  const double high_branch = 2 * c_l * big * big;
  return p * std::max(low_branch, high_branch);
}

Eigen::VectorXd SublevelBound(const LyapunovContext& ctx, double level) {
  if (level < 0) throw PreconditionError("level must be nonnegative");
  const Eigen::VectorXd& xb = ctx.x_bar;
  Eigen::VectorXd b(xb.size());
  for (Eigen::Index i = 0; i < xb.size(); ++i) {
    // largest r >= 1 with g(r) <= level / x_bar_i; g is increasing there
    const double target = level / xb[i];
    double lo = 1, hi = 2;
    while (EntropyG(hi) <= target) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = (lo + hi) / 2;
      (EntropyG(mid) <= target ? lo : hi) = mid;
    }
    b[i] = xb[i] * hi;
  }
  return b;
}

Eigen::VectorXd LogObserverFloor(const ReactionNetwork& net, const OutputMap& c,
                                 const Eigen::VectorXd& z0, double u_bound, double b) {
  const int n = net.num_species();
  if (z0.size() != n || c.num_species() != n) throw DimensionMismatch("size mismatch");
  if (!(b > 0)) throw PreconditionError("box bound b must be positive");
  const auto& cm = c.matrix();
  const auto& bm = net.complexes();
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    const double weight = cm.col(k).squaredNorm();
    if (weight == 0) continue;
    // |f_k(z)| on (0, b]^n
    double a1 = 0;
    for (const auto& e : net.edges()) {
      const int degree = bm.col(e.source).sum();
      a1 += e.rate * std::pow(b, degree) * std::abs(bm(k, e.target) - bm(k, e.source));
    }
    const double a2 = cm.col(k).sum() * u_bound;
    double a3 = 0;
    for (int i = 0; i < cm.rows(); ++i) {
      for (int j = 0; j < n; ++j) {
        if (j != k) a3 += cm(i, k) * cm(i, j) * std::max(0.0, std::log(b));
      }
    }
    eps[k] = std::min(std::exp(-(a1 + a2 + a3) / weight) / 2, z0[k]);
  }
  return eps;
}

}  // namespace crnobs
