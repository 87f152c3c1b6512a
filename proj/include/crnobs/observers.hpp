#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"

namespace crnobs {

struct MainObserver {};
struct WeightedObserver {
  Eigen::VectorXd weights;  // diagonal of W, strictly positive
};
struct LogObserver {};
struct SteeringFeedback {
  std::vector<int> k;     // steered species indices
  Eigen::VectorXd gamma;  // one positive gain per index
  Eigen::VectorXd x_bar;
};
struct ExtendedKalmanFilter {
  Eigen::MatrixXd q, r, p0;
};
struct LuenbergerObserver {
  Eigen::MatrixXd l;  // n x p
};

using ObserverKind = std::variant<MainObserver, WeightedObserver, LogObserver, SteeringFeedback,
                                  ExtendedKalmanFilter, LuenbergerObserver>;

/// An estimator bound to its network and output map. Construction validates
/// the variant's invariants (positive weights, valid K, SPD covariances, shapes).
class ObserverSpec {
 public:
  ObserverSpec(ReactionNetwork net, OutputMap c, ObserverKind kind, std::string label = {});

  const ReactionNetwork& net() const { return net_; }
  const OutputMap& output() const { return c_; }
  const ObserverKind& kind() const { return kind_; }
  const std::string& label() const { return label_; }
  std::string type_name() const;

  bool is_log() const { return std::holds_alternative<LogObserver>(kind_); }
  bool is_ekf() const { return std::holds_alternative<ExtendedKalmanFilter>(kind_); }

  /// Length of the packed state: n, or n + n^2 for the EKF (z then P, column major).
  int state_size() const;
  Eigen::VectorXd PackInitial(const Eigen::VectorXd& z0) const;
  Eigen::VectorXd Estimate(const Eigen::VectorXd& state) const;

  /// Time derivative of the packed state driven by the output sample y.
  /// Steering ignores y. The log observer consumes y through rho.
  Eigen::VectorXd Rhs(const Eigen::VectorXd& state, const Eigen::VectorXd& y) const;

  /// Symmetrizes the EKF covariance in place; no-op otherwise.
  void PostStep(Eigen::VectorXd& state) const;

 private:
  ReactionNetwork net_;
  OutputMap c_;
  ObserverKind kind_;
  std::string label_;
};

/// f(z) + C^T (y - h(z)).
Eigen::VectorXd MainRhs(const ReactionNetwork& net, const OutputMap& c, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& y);
/// Same as MainRhs; f already sums over linkage classes.
Eigen::VectorXd MultipleLinkageRhs(const ReactionNetwork& net, const OutputMap& c,
                                   const Eigen::VectorXd& z, const Eigen::VectorXd& y);
/// f(z) + C^T W (y - h(z)).
Eigen::VectorXd WeightedRhs(const ReactionNetwork& net, const OutputMap& c,
                            const Eigen::VectorXd& weights, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& y);
/// f(z) + C^T (rho(y) - H(z)). DomainError unless z > 0 and y > 0.
Eigen::VectorXd LogRhs(const ReactionNetwork& net, const OutputMap& c, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& y);
/// f(x) + sum_k gamma_k (x_bar_k - x_k) e_k.
Eigen::VectorXd SteeringRhs(const ReactionNetwork& net, const SteeringFeedback& spec,
                            const Eigen::VectorXd& x);
/// Throws InvalidK unless D + span{e_k : k in K} = R^n.
void ValidateSteeringSet(const ReactionNetwork& net, const std::vector<int>& k);

struct EkfDerivative {
  Eigen::VectorXd dz;
  Eigen::MatrixXd dp;
};
/// -P H^T R^-1 H P + F P + P F^T + Q.
Eigen::MatrixXd RiccatiRhs(const Eigen::MatrixXd& f_jac, const Eigen::MatrixXd& h_jac,
                           const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r);
/// Gain P H^T R^-1, z' = f(z) + gain (y - h(z)),
/// P' = -P H^T R^-1 H P + F P + P F^T + Q.
EkfDerivative EkfRhs(const ReactionNetwork& net, const OutputMap& c,
                     const ExtendedKalmanFilter& spec, const Eigen::VectorXd& z,
                     const Eigen::MatrixXd& p, const Eigen::VectorXd& y);
/// f(z) + L (y - h(z)).
Eigen::VectorXd LuenbergerRhs(const ReactionNetwork& net, const OutputMap& c,
                              const Eigen::MatrixXd& l, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& y);

struct HurwitzReport {
  bool hurwitz = false;
  std::vector<double> eigen_real_parts;
};
/// Eigenvalues of F(x_bar) - L H(x_bar); Hurwitz iff all real parts < -margin.
HurwitzReport CheckHurwitz(const ReactionNetwork& net, const OutputMap& c,
                           const Eigen::VectorXd& x_bar, const Eigen::MatrixXd& l,
                           double margin = 0.0);
HurwitzReport CheckHurwitz(const Eigen::MatrixXd& m, double margin = 0.0);

/// {"type": "main" | "weighted" | "log" | "steering" | "ekf" | "luenberger", ...}.
/// Matrices are nested arrays or a scalar meaning scalar * I.
ObserverSpec ObserverFromJson(const nlohmann::json& doc, const ReactionNetwork& net,
                              const OutputMap& c);
nlohmann::json ToJson(const ObserverSpec& spec);

}  // namespace crnobs
