#include "crnobs/linalg.hpp"

#include <cmath>

namespace crnobs {

int NumericalRank(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = kRankTolerance * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return rank;
}

void NormalizeSign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

Eigen::MatrixXd NullspaceRows(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const int rank = NumericalRank(m);
  Eigen::MatrixXd rows(n - rank, n);
  for (Eigen::Index k = rank; k < n; ++k) {
    Eigen::VectorXd v = svd.matrixV().col(k);
    NormalizeSign(v);
    rows.row(k - rank) = v.transpose();
  }
  return rows;
}

}  // namespace crnobs
