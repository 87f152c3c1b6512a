#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace crnobs {

struct SimConfig {
  double t_end = 10.0;
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-14;
  double positivity_floor = 0.0;
  std::uint64_t seed = 0;
  double record_stride = 0.1;
  // A state with |x| above this counts as escaped.
  double escape_norm = 1e10;
  long max_steps = 50'000'000;

  void Validate() const;
};

enum class Termination { kConverged, kTimeEnd, kFiniteEscape, kDomainExit, kStepUnderflow };

std::string ToString(Termination t);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  Termination termination = Termination::kTimeEnd;
  // Escape or exit time, and the bracket width around it. NaN when unused.
  double event_time = std::numeric_limits<double>::quiet_NaN();
  double event_bracket = std::numeric_limits<double>::quiet_NaN();
  int event_coordinate = -1;
  std::string message;
  long accepted_steps = 0;
  long rejected_steps = 0;

  bool empty() const { return times.empty(); }
  const Eigen::VectorXd& final_state() const { return states.back(); }
};

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

struct IntegrateHooks {
  // Coordinates that must stay above cfg.positivity_floor. Empty = none.
  std::vector<bool> guarded;
  // Checked after every accepted step; true ends the run as kConverged.
  std::function<bool(double, const Eigen::VectorXd&)> stop;
  // May modify the accepted state in place (e.g. symmetrize a covariance).
  std::function<void(Eigen::VectorXd&)> post_step;
  // Called with the index k of each record interval [t_k, t_k+1) as it starts.
  std::function<void(int)> segment_start;
  // Sorted times no step may cross. interval_start(lo, hi) fires at t = 0 and
  // on reaching each breakpoint, with hi the next breakpoint (or t_end).
  std::vector<double> breakpoints;
  std::function<void(double, double)> interval_start;
};

/// Dormand-Prince 5(4) with FSAL. Steps never straddle a record time, and
/// states are recorded exactly on the grid 0, stride, 2 stride, ..., t_end.
/// A DomainError thrown by `rhs` rejects the step; so does a guarded
/// coordinate reaching the floor, a non-finite value, or an OverflowError.
Trajectory Integrate(const Rhs& rhs, const Eigen::VectorXd& x0, const SimConfig& cfg,
                     const IntegrateHooks& hooks = {});

}  // namespace crnobs
