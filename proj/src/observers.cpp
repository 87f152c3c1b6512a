#include "crnobs/observers.hpp"

#include <algorithm>
#include <cmath>

#include "crnobs/errors.hpp"
#include "crnobs/linalg.hpp"

namespace crnobs {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void CheckSpd(const Eigen::MatrixXd& m, int n, const std::string& what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionMismatch(what + " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + m.cwiseAbs().maxCoeff())) {
    throw ValidationError(what + " must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw ValidationError(what + " must be positive definite");
}

Eigen::VectorXd Residual(const OutputMap& c, const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  if (y.size() != c.num_outputs()) {
    throw DimensionMismatch("output sample has length " + std::to_string(y.size()) + ", expected " +
                            std::to_string(c.num_outputs()));
  }
  return y - EvalH(c, z);
}

}  // namespace

Eigen::VectorXd MainRhs(const ReactionNetwork& net, const OutputMap& c, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& y) {
  return EvalF(net, z) + c.matrix().transpose() * Residual(c, z, y);
}

Eigen::VectorXd MultipleLinkageRhs(const ReactionNetwork& net, const OutputMap& c,
                                   const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  return MainRhs(net, c, z, y);
}

Eigen::VectorXd WeightedRhs(const ReactionNetwork& net, const OutputMap& c,
                            const Eigen::VectorXd& weights, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& y) {
  return EvalF(net, z) + c.matrix().transpose() * weights.cwiseProduct(Residual(c, z, y));
}

Eigen::VectorXd LogRhs(const ReactionNetwork& net, const OutputMap& c, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& y) {
  if (y.size() != c.num_outputs()) throw DimensionMismatch("output sample has the wrong length");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0)) {
      throw DomainError("log observer needs a positive output, y_" + std::to_string(i) + " = " +
                        std::to_string(y[i]));
    }
  }
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0)) {
      throw DomainError("log observer state left the positive orthant at z_" + std::to_string(i),
                        static_cast<int>(i));
    }
  }
  return EvalF(net, z) + c.matrix().transpose() * (Rho(y) - EvalHLog(c, z));
}

void ValidateSteeringSet(const ReactionNetwork& net, const std::vector<int>& k) {
  const int n = net.num_species();
  const StoichSubspace sub = StoichBasis(net);
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(sub.d0.rows() + static_cast<Eigen::Index>(k.size()), n);
  stacked.topRows(sub.d0.rows()) = sub.d0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] < 0 || k[i] >= n) throw InvalidK("species index " + std::to_string(k[i]) + " out of range");
    stacked(sub.d0.rows() + static_cast<Eigen::Index>(i), k[i]) = 1.0;
  }
  const int rank = NumericalRank(stacked);
  if (rank != n) {
    throw InvalidK("D + span{e_k : k in K} has dimension " + std::to_string(rank) + " < n = " +
                   std::to_string(n));
  }
}

Eigen::VectorXd SteeringRhs(const ReactionNetwork& net, const SteeringFeedback& spec,
                            const Eigen::VectorXd& x) {
  Eigen::VectorXd dx = EvalF(net, x);
  for (std::size_t i = 0; i < spec.k.size(); ++i) {
    const int k = spec.k[i];
    dx[k] += spec.gamma[static_cast<Eigen::Index>(i)] * (spec.x_bar[k] - x[k]);
  }
  return dx;
}

Eigen::MatrixXd RiccatiRhs(const Eigen::MatrixXd& f_jac, const Eigen::MatrixXd& h_jac,
                           const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd gain = p * r.ldlt().solve(h_jac).transpose();
  Eigen::MatrixXd dp = -gain * h_jac * p + f_jac * p + p * f_jac.transpose() + q;
  if (!dp.allFinite()) throw OverflowError("Riccati derivative is not finite");
  return dp;
}

EkfDerivative EkfRhs(const ReactionNetwork& net, const OutputMap& c,
                     const ExtendedKalmanFilter& spec, const Eigen::VectorXd& z,
                     const Eigen::MatrixXd& p, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd f_jac = EvalJacobianF(net, z);
  const Eigen::MatrixXd h_jac = EvalJacobianH(c, z);
  const Eigen::MatrixXd r_inv_h = spec.r.ldlt().solve(h_jac);  // R^-1 H
  const Eigen::MatrixXd gain = p * r_inv_h.transpose();         // P H^T R^-1 (R symmetric)
  EkfDerivative d;
  d.dz = EvalF(net, z) + gain * Residual(c, z, y);
  d.dp = RiccatiRhs(f_jac, h_jac, p, spec.q, spec.r);
  return d;
}

Eigen::VectorXd LuenbergerRhs(const ReactionNetwork& net, const OutputMap& c,
                              const Eigen::MatrixXd& l, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& y) {
  return EvalF(net, z) + l * Residual(c, z, y);
}

HurwitzReport CheckHurwitz(const Eigen::MatrixXd& m, double margin) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  HurwitzReport report;
  report.hurwitz = true;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double re = es.eigenvalues()[i].real();
    report.eigen_real_parts.push_back(re);
    if (!(re < -margin)) report.hurwitz = false;
  }
  std::sort(report.eigen_real_parts.begin(), report.eigen_real_parts.end());
  return report;
}

HurwitzReport CheckHurwitz(const ReactionNetwork& net, const OutputMap& c,
                           const Eigen::VectorXd& x_bar, const Eigen::MatrixXd& l, double margin) {
  if (!(x_bar.array() > 0).all()) throw DomainError("x_bar must be strictly positive");
  if (l.rows() != net.num_species() || l.cols() != c.num_outputs()) {
    throw DimensionMismatch("L must be n x p");
  }
  return CheckHurwitz(EvalJacobianF(net, x_bar) - l * EvalJacobianH(c, x_bar), margin);
}

ObserverSpec::ObserverSpec(ReactionNetwork net, OutputMap c, ObserverKind kind, std::string label)
    : net_(std::move(net)), c_(std::move(c)), kind_(std::move(kind)), label_(std::move(label)) {
  const int n = net_.num_species();
  const int p = c_.num_outputs();
  if (c_.num_species() != n) throw DimensionMismatch("output map does not match the network");
  std::visit(Overloaded{
                 [](const MainObserver&) {},
                 [](const LogObserver&) {},
                 [&](const WeightedObserver& w) {
                   if (w.weights.size() != p || !(w.weights.array() > 0).all()) {
                     throw ValidationError("W must be a positive diagonal with p entries");
                   }
                 },
                 [&](const SteeringFeedback& s) {
                   if (static_cast<Eigen::Index>(s.k.size()) != s.gamma.size() ||
                       !(s.gamma.array() > 0).all()) {
                     throw ValidationError("steering needs one positive gamma per index in K");
                   }
                   if (s.x_bar.size() != n) throw DimensionMismatch("steering x_bar has the wrong length");
                   ValidateSteeringSet(net_, s.k);
                 },
                 [&](const ExtendedKalmanFilter& e) {
                   CheckSpd(e.q, n, "EKF Q");
                   CheckSpd(e.r, p, "EKF R");
                   CheckSpd(e.p0, n, "EKF P0");
                 },
                 [&](const LuenbergerObserver& l) {
                   if (l.l.rows() != n || l.l.cols() != p) throw DimensionMismatch("L must be n x p");
                 },
             },
             kind_);
  if (label_.empty()) label_ = type_name();
}

std::string ObserverSpec::type_name() const {
  return std::visit(Overloaded{
                        [](const MainObserver&) { return std::string("main"); },
                        [](const WeightedObserver&) { return std::string("weighted"); },
                        [](const LogObserver&) { return std::string("log"); },
                        [](const SteeringFeedback&) { return std::string("steering"); },
                        [](const ExtendedKalmanFilter&) { return std::string("ekf"); },
                        [](const LuenbergerObserver&) { return std::string("luenberger"); },
                    },
                    kind_);
}

int ObserverSpec::state_size() const {
  const int n = net_.num_species();
  return is_ekf() ? n + n * n : n;
}

Eigen::VectorXd ObserverSpec::PackInitial(const Eigen::VectorXd& z0) const {
  const int n = net_.num_species();
  if (z0.size() != n) throw DimensionMismatch("z0 has the wrong length");
  if (is_log() && !(z0.array() > 0).all()) {
    throw DomainError("log observer needs a strictly positive z0");
  }
  Eigen::VectorXd state(state_size());
  state.head(n) = z0;
  if (const auto* e = std::get_if<ExtendedKalmanFilter>(&kind_)) {
    state.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(e->p0.data(), n * n);
  }
  return state;
}

Eigen::VectorXd ObserverSpec::Estimate(const Eigen::VectorXd& state) const {
  return state.head(net_.num_species());
}

Eigen::VectorXd ObserverSpec::Rhs(const Eigen::VectorXd& state, const Eigen::VectorXd& y) const {
  const int n = net_.num_species();
  const Eigen::VectorXd z = state.head(n);
  return std::visit(
      Overloaded{
          [&](const MainObserver&) -> Eigen::VectorXd { return MainRhs(net_, c_, z, y); },
          [&](const WeightedObserver& w) -> Eigen::VectorXd {
            return WeightedRhs(net_, c_, w.weights, z, y);
          },
          [&](const LogObserver&) -> Eigen::VectorXd { return LogRhs(net_, c_, z, y); },
          [&](const SteeringFeedback& s) -> Eigen::VectorXd { return SteeringRhs(net_, s, z); },
          [&](const ExtendedKalmanFilter& e) -> Eigen::VectorXd {
            const Eigen::Map<const Eigen::MatrixXd> p(state.data() + n, n, n);
            const EkfDerivative d = EkfRhs(net_, c_, e, z, p, y);
            Eigen::VectorXd out(n + n * n);
            out.head(n) = d.dz;
            out.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(d.dp.data(), n * n);
            return out;
          },
          [&](const LuenbergerObserver& l) -> Eigen::VectorXd {
            return LuenbergerRhs(net_, c_, l.l, z, y);
          },
      },
      kind_);
}

void ObserverSpec::PostStep(Eigen::VectorXd& state) const {
  if (!is_ekf()) return;
  const int n = net_.num_species();
  Eigen::Map<Eigen::MatrixXd> p(state.data() + n, n, n);
  const Eigen::MatrixXd sym = (p + p.transpose()) / 2;
  p = sym;
}

namespace {

Eigen::MatrixXd MatrixFromJson(const nlohmann::json& j, int rows, int cols, const std::string& what) {
  if (j.is_number()) {
    if (rows != cols) throw ValidationError(what + ": a scalar only stands for a square matrix");
    return j.get<double>() * Eigen::MatrixXd::Identity(rows, cols);
  }
  const auto data = j.get<std::vector<std::vector<double>>>();
  if (static_cast<int>(data.size()) != rows) {
    throw DimensionMismatch(what + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(data[i].size()) != cols) {
      throw DimensionMismatch(what + " must have " + std::to_string(cols) + " columns");
    }
    for (int k = 0; k < cols; ++k) m(i, k) = data[i][k];
  }
  return m;
}

Eigen::VectorXd VectorFromJson(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json MatrixToJson(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back(std::vector<double>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) out.back()[k] = m(i, k);
  }
  return out;
}

std::vector<double> ToStd(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

ObserverSpec ObserverFromJson(const nlohmann::json& doc, const ReactionNetwork& net,
                              const OutputMap& c) {
  const std::string type = doc.at("type").get<std::string>();
  const std::string label = doc.value("name", std::string());
  const int n = net.num_species();
  const int p = c.num_outputs();
  ObserverKind kind;
  if (type == "main") {
    kind = MainObserver{};
  } else if (type == "log") {
    kind = LogObserver{};
  } else if (type == "weighted") {
    kind = WeightedObserver{VectorFromJson(doc.at("weights"))};
  } else if (type == "steering") {
    SteeringFeedback s;
    for (const auto& k : doc.at("K")) {
      if (k.is_string()) {
        const int idx = net.species_index(k.get<std::string>());
        if (idx < 0) throw InvalidK("unknown species '" + k.get<std::string>() + "' in K");
        s.k.push_back(idx);
      } else {
        s.k.push_back(k.get<int>());
      }
    }
    const auto& g = doc.at("gamma");
    s.gamma = g.is_number() ? Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.k.size()), g.get<double>())
                            : VectorFromJson(g);
    s.x_bar = VectorFromJson(doc.at("x_bar"));
    kind = s;
  } else if (type == "ekf") {
    kind = ExtendedKalmanFilter{MatrixFromJson(doc.at("Q"), n, n, "Q"),
                                MatrixFromJson(doc.at("R"), p, p, "R"),
                                MatrixFromJson(doc.at("P0"), n, n, "P0")};
  } else if (type == "luenberger") {
    kind = LuenbergerObserver{MatrixFromJson(doc.at("L"), n, p, "L")};
  } else {
    throw ValidationError("unknown observer type '" + type + "'");
  }
  return ObserverSpec(net, c, std::move(kind), label);
}

nlohmann::json ToJson(const ObserverSpec& spec) {
  nlohmann::json doc = {{"type", spec.type_name()}, {"name", spec.label()}};
  std::visit(Overloaded{
                 [](const MainObserver&) {},
                 [](const LogObserver&) {},
                 [&](const WeightedObserver& w) { doc["weights"] = ToStd(w.weights); },
                 [&](const SteeringFeedback& s) {
                   doc["K"] = s.k;
                   doc["gamma"] = ToStd(s.gamma);
                   doc["x_bar"] = ToStd(s.x_bar);
                 },
                 [&](const ExtendedKalmanFilter& e) {
                   doc["Q"] = MatrixToJson(e.q);
                   doc["R"] = MatrixToJson(e.r);
                   doc["P0"] = MatrixToJson(e.p0);
                 },
                 [&](const LuenbergerObserver& l) { doc["L"] = MatrixToJson(l.l); },
             },
             spec.kind());
  return doc;
}

}  // namespace crnobs
