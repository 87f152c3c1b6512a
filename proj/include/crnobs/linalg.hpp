#pragma once

#include <Eigen/Dense>

namespace crnobs {

/// Relative singular-value cutoff used for every rank decision.
inline constexpr double kRankTolerance = 1e-9;

/// Numerical rank: singular values above kRankTolerance * sigma_max.
int NumericalRank(const Eigen::MatrixXd& m);

/// Orthonormal basis of {v : m v = 0}, returned as rows. Each row is sign
/// normalized so that its first nonzero component is positive.
Eigen::MatrixXd NullspaceRows(const Eigen::MatrixXd& m);

/// Flips `v` so its first component with |v_i| > 1e-12 is positive.
void NormalizeSign(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace crnobs
