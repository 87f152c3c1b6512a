#include "crnobs/ode.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "crnobs/errors.hpp"

namespace crnobs {

void SimConfig::Validate() const {
  if (!(t_end > 0)) throw PreconditionError("t_end must be positive");
  if (!(rtol > 0) || !(atol > 0)) throw PreconditionError("rtol and atol must be positive");
  if (!(min_step > 0) || !(min_step < max_step)) {
    throw PreconditionError("need 0 < min_step < max_step");
  }
  if (!(record_stride > 0)) throw PreconditionError("record_stride must be positive");
}

std::string ToString(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kTimeEnd: return "t_end";
    case Termination::kFiniteEscape: return "finite_escape";
    case Termination::kDomainExit: return "domain_exit";
    case Termination::kStepUnderflow: return "step_underflow";
  }
  return "unknown";
}

namespace {

// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

enum class Trial { kOk, kDomain, kBlowup, kGuard };

struct Stepper {
  const Rhs& rhs;
  const SimConfig& cfg;
  const IntegrateHooks& hooks;
  int n;
  Eigen::VectorXd k1, k2, k3, k4, k5, k6, k7, y_new, err;
  int bad_coordinate = -1;
  std::string bad_message;

  Stepper(const Rhs& r, const SimConfig& c, const IntegrateHooks& h, int dim)
      : rhs(r), cfg(c), hooks(h), n(dim) {}

  bool Finite(const Eigen::VectorXd& v) const {
    return v.allFinite() && v.norm() <= cfg.escape_norm;
  }

  // Evaluates rhs into `out`, mapping failures to a Trial code.
  Trial Eval(double t, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    if (!y.allFinite() || y.norm() > cfg.escape_norm) return Trial::kBlowup;
    try {
      out = rhs(t, y);
    } catch (const DomainError& e) {
      bad_coordinate = e.coordinate();
      bad_message = e.what();
      return Trial::kDomain;
    } catch (const OverflowError& e) {
      bad_message = e.what();
      return Trial::kBlowup;
    }
    return out.allFinite() ? Trial::kOk : Trial::kBlowup;
  }

  Trial Step(double t, const Eigen::VectorXd& y, double h) {
    Trial r;
    if ((r = Eval(t + c2 * h, y + h * (a21 * k1), k2)) != Trial::kOk) return r;
    if ((r = Eval(t + c3 * h, y + h * (a31 * k1 + a32 * k2), k3)) != Trial::kOk) return r;
    if ((r = Eval(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4)) != Trial::kOk)
      return r;
    if ((r = Eval(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5)) !=
        Trial::kOk)
      return r;
    if ((r = Eval(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5),
                  k6)) != Trial::kOk)
      return r;
    y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    if (!Finite(y_new)) return Trial::kBlowup;
    for (int i = 0; i < n && i < static_cast<int>(hooks.guarded.size()); ++i) {
      if (hooks.guarded[i] && !(y_new[i] > cfg.positivity_floor)) {
        bad_coordinate = i;
        bad_message = "guarded coordinate " + std::to_string(i) + " would reach the floor";
        return Trial::kGuard;
      }
    }
    if ((r = Eval(t + h, y_new, k7)) != Trial::kOk) return r;
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return Trial::kOk;
  }

  double ErrorNorm(const Eigen::VectorXd& y) const {
    const Eigen::ArrayXd scale =
        cfg.atol + cfg.rtol * y.array().abs().max(y_new.array().abs());
    return std::sqrt((err.array() / scale).square().mean());
  }

  double InitialStep(double t, const Eigen::VectorXd& y) {
    const Eigen::ArrayXd scale = cfg.atol + cfg.rtol * y.array().abs();
    const double d0 = std::sqrt((y.array() / scale).square().mean());
    const double d1 = std::sqrt((k1.array() / scale).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg.max_step);
    Eigen::VectorXd probe;
    if (Eval(t + h0, y + h0 * k1, probe) != Trial::kOk) return std::max(h0 * 1e-3, cfg.min_step);
    const double d2 = std::sqrt(((probe - k1).array() / scale).square().mean()) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100 * h0, h1, cfg.max_step});
  }
};

}  // namespace

Trajectory Integrate(const Rhs& rhs, const Eigen::VectorXd& x0, const SimConfig& cfg,
                     const IntegrateHooks& hooks) {
  cfg.Validate();
  Trajectory traj;
  const int n = static_cast<int>(x0.size());
  Stepper st(rhs, cfg, hooks, n);

  const long num_records = static_cast<long>(std::ceil(cfg.t_end / cfg.record_stride - 1e-9));
  auto record_time = [&](long k) {
    return k >= num_records ? cfg.t_end : static_cast<double>(k) * cfg.record_stride;
  };

  double t = 0.0;
  Eigen::VectorXd y = x0;
  traj.times.push_back(t);
  traj.states.push_back(y);
  if (!y.allFinite()) throw PreconditionError("initial state is not finite");

  auto finish = [&](Termination why, std::string message = {}) {
    traj.termination = why;
    traj.message = std::move(message);
    if (traj.times.back() != t) {
      traj.times.push_back(t);
      traj.states.push_back(y);
    }
    return traj;
  };

  long segment = 0;
  bool need_k1 = true;
  double h = 0.0;
  if (hooks.segment_start) hooks.segment_start(0);

  std::size_t bp = 0;
  auto next_breakpoint = [&]() {
    while (bp < hooks.breakpoints.size() && hooks.breakpoints[bp] <= t) ++bp;
    return bp < hooks.breakpoints.size() ? std::min(hooks.breakpoints[bp], cfg.t_end) : cfg.t_end;
  };
  if (hooks.interval_start) hooks.interval_start(0.0, next_breakpoint());

  while (true) {
    const double t_record = record_time(segment + 1);
    const double t_break = next_breakpoint();
    const double t_next = std::min(t_record, t_break);
    if (need_k1) {
      const Trial r = st.Eval(t, y, st.k1);
      if (r == Trial::kDomain) {
        traj.event_time = t;
        traj.event_bracket = 0;
        traj.event_coordinate = st.bad_coordinate;
        return finish(Termination::kDomainExit, st.bad_message);
      }
      if (r != Trial::kOk) {
        traj.event_time = t;
        traj.event_bracket = 0;
        return finish(Termination::kFiniteEscape, "right-hand side not finite");
      }
      need_k1 = false;
    }
    if (h <= 0) h = st.InitialStep(t, y);

    const double remaining = t_next - t;
    const bool clipped = h >= remaining;
    const double h_try = clipped ? remaining : std::min(h, cfg.max_step);
    const Trial r = st.Step(t, y, h_try);

    double err_norm = 0;
    if (r == Trial::kOk) err_norm = st.ErrorNorm(y);
    if (r != Trial::kOk || err_norm > 1.0) {
      ++traj.rejected_steps;
      const double h_new =
          r == Trial::kOk ? h_try * std::max(0.2, 0.9 * std::pow(err_norm, -0.2)) : h_try / 2;
      if (h_new < cfg.min_step) {
        traj.event_time = t;
        traj.event_bracket = h_try;
        traj.event_coordinate = st.bad_coordinate;
        if (r == Trial::kDomain || r == Trial::kGuard) {
          return finish(Termination::kDomainExit, st.bad_message);
        }
        if (r == Trial::kBlowup) {
          return finish(Termination::kFiniteEscape, "solution escapes near t = " +
                                                        std::to_string(t));
        }
        return finish(Termination::kStepUnderflow,
                      "step size fell below min_step at t = " + std::to_string(t));
      }
      h = h_new;
      continue;
    }

    // accepted
    ++traj.accepted_steps;
    t = clipped ? t_next : t + h_try;
    y = st.y_new;
    std::swap(st.k1, st.k7);
    if (hooks.post_step) {
      hooks.post_step(y);
      need_k1 = true;
    }
    const double grow = err_norm == 0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
    // a clipped step says nothing about the step the error would allow
    h = clipped ? std::max(h, h_try * grow) : h_try * grow;

    if (clipped && t_next == t_break && t < cfg.t_end && hooks.interval_start) {
      hooks.interval_start(t, next_breakpoint());
      need_k1 = true;
    }
    if (clipped && t_next == t_record) {
      traj.times.push_back(t);
      traj.states.push_back(y);
      ++segment;
      if (t >= cfg.t_end) {
        traj.termination = Termination::kTimeEnd;
        return traj;
      }
      if (hooks.segment_start) {
        hooks.segment_start(static_cast<int>(segment));
        need_k1 = true;
      }
    }
    if (hooks.stop && hooks.stop(t, y)) return finish(Termination::kConverged);
    if (traj.accepted_steps + traj.rejected_steps >= cfg.max_steps) {
      return finish(Termination::kStepUnderflow, "step budget exhausted at t = " +
                                                     std::to_string(t));
    }
  }
}

}  // namespace crnobs
