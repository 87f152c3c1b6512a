#pragma once

#include <Eigen/Dense>

#include "crnobs/network.hpp"

namespace crnobs {

/// Monomial output exponents. Row i of C defines h_i(x) = prod_l |x_l|^c_il.
/// Every entry is 0 or >= 1 and no row is all zero.
class OutputMap {
 public:
  explicit OutputMap(Eigen::MatrixXd c);

  int num_outputs() const { return static_cast<int>(c_.rows()); }
  int num_species() const { return static_cast<int>(c_.cols()); }
  const Eigen::MatrixXd& matrix() const { return c_; }

 private:
  Eigen::MatrixXd c_;
};

/// Mass-action field f(x) = sum_ij a_ij x^b_j (b_i - b_j).
/// Throws OverflowError when the result is not finite.
Eigen::VectorXd EvalF(const ReactionNetwork& net, const Eigen::VectorXd& x);

/// Contribution of the edges inside linkage class `block` alone.
Eigen::VectorXd EvalFBlock(const ReactionNetwork& net, int block,
                           const Eigen::VectorXd& x);

Eigen::MatrixXd EvalJacobianF(const ReactionNetwork& net, const Eigen::VectorXd& x);

/// h(x) with the |x_l| convention and 0^0 = 1.
Eigen::VectorXd EvalH(const OutputMap& c, const Eigen::VectorXd& x);

/// H(x) = C rho(x). Only coordinates that some output actually uses must be
/// positive; DomainError otherwise.
Eigen::VectorXd EvalHLog(const OutputMap& c, const Eigen::VectorXd& x);

/// Entry (i, l) = c_il h_i(x) / x_l, evaluated in product form.
/// DomainError when x_l = 0 and c_il != 0.
Eigen::MatrixXd EvalJacobianH(const OutputMap& c, const Eigen::VectorXd& x);

/// Componentwise log. DomainError on a nonpositive entry.
Eigen::VectorXd Rho(const Eigen::VectorXd& x);
Eigen::VectorXd ExpMap(const Eigen::VectorXd& v);

}  // namespace crnobs
