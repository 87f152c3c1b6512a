#include "crnobs/kinetics.hpp"

#include <cmath>
#include <string>

#include "crnobs/errors.hpp"

namespace crnobs {

namespace {

double IntPow(double base, int e) {
  double result = 1.0;
  while (e > 0) {
    if (e & 1) result *= base;
    base *= base;
    e >>= 1;
  }
  return result;
}

double Monomial(const Eigen::MatrixXi& b, int j, const Eigen::VectorXd& x) {
  double m = 1.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (b(k, j) != 0) m *= IntPow(x[k], b(k, j));
  }
  return m;
}

// d/dx_l of x^b_j, without dividing by x_l.
double MonomialPartial(const Eigen::MatrixXi& b, int j, int l, const Eigen::VectorXd& x) {
  const int e = b(l, j);
  if (e == 0) return 0.0;
  double m = e * IntPow(x[l], e - 1);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (k != l && b(k, j) != 0) m *= IntPow(x[k], b(k, j));
  }
  return m;
}

void CheckLength(const ReactionNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.num_species()) {
    throw DimensionMismatch("state has length " + std::to_string(x.size()) +
                            ", network has " + std::to_string(net.num_species()) +
                            " species");
  }
}

void CheckLength(const OutputMap& c, const Eigen::VectorXd& x) {
  if (x.size() != c.num_species()) {
    throw DimensionMismatch("state has length " + std::to_string(x.size()) +
                            ", output map expects " + std::to_string(c.num_species()));
  }
}

Eigen::VectorXd SumEdges(const ReactionNetwork& net, int block, const Eigen::VectorXd& x) {
  CheckLength(net, x);
  const auto& b = net.complexes();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(x.size());
  for (const auto& e : net.edges()) {
    if (block >= 0 && net.linkage_class_of(e.source) != block) continue;
    const double flux = e.rate * Monomial(b, e.source, x);
    f += flux * (b.col(e.target) - b.col(e.source)).cast<double>();
  }
  if (!f.allFinite()) throw OverflowError("mass-action field is not finite");
  return f;
}

}  // namespace

OutputMap::OutputMap(Eigen::MatrixXd c) : c_(std::move(c)) {
  if (c_.rows() == 0 || c_.cols() == 0) throw ValidationError("output map is empty");
  for (Eigen::Index i = 0; i < c_.rows(); ++i) {
    bool any = false;
    for (Eigen::Index l = 0; l < c_.cols(); ++l) {
      const double v = c_(i, l);
      if (!std::isfinite(v) || (v != 0.0 && v < 1.0)) {
        throw ValidationError("output exponent C(" + std::to_string(i) + "," +
                              std::to_string(l) + ") = " + std::to_string(v) +
                              " must be 0 or >= 1");
      }
      any = any || v != 0.0;
    }
    if (!any) throw ValidationError("row " + std::to_string(i) + " of C is all zero");
  }
}

Eigen::VectorXd EvalF(const ReactionNetwork& net, const Eigen::VectorXd& x) {
  return SumEdges(net, -1, x);
}

Eigen::VectorXd EvalFBlock(const ReactionNetwork& net, int block, const Eigen::VectorXd& x) {
  if (block < 0 || block >= net.num_linkage_classes()) {
    throw PreconditionError("no linkage class " + std::to_string(block));
  }
  return SumEdges(net, block, x);
}

Eigen::MatrixXd EvalJacobianF(const ReactionNetwork& net, const Eigen::VectorXd& x) {
  CheckLength(net, x);
  const int n = net.num_species();
  const auto& b = net.complexes();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : net.edges()) {
    const Eigen::VectorXd dir = (b.col(e.target) - b.col(e.source)).cast<double>();
    for (int l = 0; l < n; ++l) {
      const double d = MonomialPartial(b, e.source, l, x);
      if (d != 0.0) jac.col(l) += e.rate * d * dir;
    }
  }
  if (!jac.allFinite()) throw OverflowError("Jacobian of f is not finite");
  return jac;
}

Eigen::VectorXd EvalH(const OutputMap& c, const Eigen::VectorXd& x) {
  CheckLength(c, x);
  const auto& cm = c.matrix();
  Eigen::VectorXd h(cm.rows());
  for (Eigen::Index i = 0; i < cm.rows(); ++i) {
    double v = 1.0;
    for (Eigen::Index l = 0; l < cm.cols(); ++l) {
      if (cm(i, l) != 0.0) v *= std::pow(std::abs(x[l]), cm(i, l));
    }
    h[i] = v;
  }
  return h;
}

Eigen::VectorXd EvalHLog(const OutputMap& c, const Eigen::VectorXd& x) {
  CheckLength(c, x);
  const auto& cm = c.matrix();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cm.rows());
  for (Eigen::Index l = 0; l < cm.cols(); ++l) {
    if ((cm.col(l).array() == 0.0).all()) continue;
    if (!(x[l] > 0)) {
      throw DomainError("H(x) needs x_" + std::to_string(l) + " > 0, got " +
                            std::to_string(x[l]),
                        static_cast<int>(l));
    }
    out += cm.col(l) * std::log(x[l]);
  }
  return out;
}

Eigen::MatrixXd EvalJacobianH(const OutputMap& c, const Eigen::VectorXd& x) {
  CheckLength(c, x);
  const auto& cm = c.matrix();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(cm.rows(), cm.cols());
  for (Eigen::Index i = 0; i < cm.rows(); ++i) {
    for (Eigen::Index l = 0; l < cm.cols(); ++l) {
      const double cil = cm(i, l);
      if (cil == 0.0) continue;
      if (x[l] == 0.0) {
        throw DomainError("Jacobian of h undefined at x_" + std::to_string(l) + " = 0",
                          static_cast<int>(l));
      }
      const double sign = x[l] > 0 ? 1.0 : -1.0;
      double v = cil * sign * std::pow(std::abs(x[l]), cil - 1.0);
      for (Eigen::Index k = 0; k < cm.cols(); ++k) {
        if (k != l && cm(i, k) != 0.0) v *= std::pow(std::abs(x[k]), cm(i, k));
      }
      jac(i, l) = v;
    }
  }
  return jac;
}

Eigen::VectorXd Rho(const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0)) {
      throw DomainError("rho needs positive entries, x_" + std::to_string(i) + " = " +
                            std::to_string(x[i]),
                        static_cast<int>(i));
    }
  }
  return x.array().log().matrix();
}

Eigen::VectorXd ExpMap(const Eigen::VectorXd& v) { return v.array().exp().matrix(); }

}  // namespace crnobs
