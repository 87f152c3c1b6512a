#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"
#include "crnobs/observers.hpp"
#include "crnobs/ode.hpp"

namespace crnobs {

struct NoiseSpec {
  enum class Kind { kNone, kBoundedWhite };
  Kind kind = Kind::kNone;
  double amplitude = 0.0;
  // Floor h(x) + n at kOutputFloor so the sample stays positive.
  bool guard = true;

  void Validate() const;
};

inline constexpr double kOutputFloor = 1e-12;

/// Noise value on record interval `interval`: uniform in the open ball of
/// radius `amplitude` in R^p, a pure function of (seed, interval).
Eigen::VectorXd NoiseSample(const NoiseSpec& spec, std::uint64_t seed, long interval, int p);
/// Piecewise-constant noise path n(t) on intervals [k stride, (k+1) stride).
Eigen::VectorXd NoiseSignal(const NoiseSpec& spec, std::uint64_t seed, double t, int p,
                            double stride);

struct Pulse {
  double center = 0.0;
  double width = 0.0;  // 0 means 20 * max_step
  double height = 0.0;
};

struct DisturbanceSpec {
  int channel = -1;  // -1: no disturbance
  double amp = 0.0, freq = 0.0, phase = 0.0;
  std::vector<Pulse> pulses;

  bool empty() const { return channel < 0 || (amp == 0.0 && pulses.empty()); }
  /// Fills default pulse widths from max_step; throws on bad widths or channel.
  DisturbanceSpec Resolved(int n, double max_step) const;
};

/// d(t): amp sin(2 pi freq t + phase) plus rectangular pulses, on one channel.
Eigen::VectorXd DisturbanceSignal(const DisturbanceSpec& spec, double t, int n);
/// Sum of the pulse heights active at t, pulses being [center - w/2, center + w/2).
double PulseLevel(const DisturbanceSpec& spec, double t);
/// Sorted pulse edges, to be used as integrator breakpoints.
std::vector<double> PulseEdges(const DisturbanceSpec& spec);

struct ExperimentOptions {
  // Run even when detectability fails.
  bool force = false;
};

struct ExperimentResult {
  std::vector<std::string> species;
  std::string observer_label;
  Trajectory joint;  // plant x, then the packed observer state
  int n = 0;
  std::vector<double> error;  // |z - x| at each record
  bool observer_left_orthant = false;
  double observer_exit_time = std::numeric_limits<double>::quiet_NaN();

  const std::vector<double>& times() const { return joint.times; }
  Trajectory Plant() const;
  Trajectory Observer() const;  // estimate z only
};

/// Co-simulates x' = f(x) + d(t) with the observer driven by h(x) + n(t).
/// The plant is positivity-guarded, and so is a Log observer. Throws
/// PreconditionError when the output map is not detectable unless forced.
ExperimentResult RunExperiment(const ReactionNetwork& net, const OutputMap& c,
                               const Eigen::VectorXd& x0, const ObserverSpec& spec,
                               const Eigen::VectorXd& z0, const NoiseSpec& noise,
                               const DisturbanceSpec& dist, const SimConfig& cfg,
                               const ExperimentOptions& opts = {});

struct Verdict {
  bool converged = false;
  bool diverged = false;
  double initial_error = 0.0;
  double final_error = 0.0;
  double max_error = 0.0;
  std::string reason;  // "converged", "growth", "terminated", "final_above_initial", "not_converged"
};

/// Converged iff the run reached t_end with final error <= threshold.
/// Diverged otherwise, with the first matching reason.
Verdict Judge(const ExperimentResult& result, double threshold = 1e-6);

struct BlowupResult {
  Trajectory trajectory;
  bool escape_detected = false;
  double escape_time = std::numeric_limits<double>::quiet_NaN();
  // Closed-form pole of w' = -eps - w^2/2, w(0) = x1(0) + x3(0).
  double comparison_escape_time = std::numeric_limits<double>::quiet_NaN();
  // Records up to the first escape: t, x1 + x3, and the integrated w.
  std::vector<double> bound_times, sum_series, bound_series;
  // max over the records of (x1 + x3) - w
  double max_bound_violation = -std::numeric_limits<double>::infinity();
};

/// The network A + B <-> C (unit rates), C = [[2,0,0],[0,0,2]], driven as
/// z' = f(z) + C^T (u - h(z)) with constant u = (-eps/4, -eps/4).
ReactionNetwork BlowupNetwork();
OutputMap BlowupOutput();
BlowupResult BlowupDemo(double eps, const Eigen::VectorXd& x0, const SimConfig& cfg);
/// Same input through z' = f(z) + C^T (u - H(z)).
Trajectory BlowupLogCounterpart(double eps, const Eigen::VectorXd& x0, const SimConfig& cfg);
double ComparisonEscapeTime(double eps, double w0);

/// Header t,<species...>; values printed with 17 significant digits.
void ExportCsv(const Trajectory& traj, const std::vector<std::string>& species,
               const std::filesystem::path& path);
/// Header t,err,x_<species...>,z_<species...>.
void ExportCsv(const ExperimentResult& result, const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable ReadCsv(const std::filesystem::path& path);

/// {network, output_map, observer | observers, x0, z0, noise, disturbance, sim, threshold}.
/// `network` is DSL text, a path to a DSL file (relative to base_dir), or a JSON network.
struct ExperimentConfig {
  ReactionNetwork net;
  OutputMap c;
  std::vector<ObserverSpec> observers;
  Eigen::VectorXd x0;
  Eigen::VectorXd z0;
  NoiseSpec noise;
  DisturbanceSpec disturbance;
  SimConfig sim;
  double threshold = 1e-6;
};
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& doc,
                                          const std::filesystem::path& base_dir = {});
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);
SimConfig SimConfigFromJson(const nlohmann::json& doc, SimConfig base = {});
NoiseSpec NoiseFromJson(const nlohmann::json& doc);
DisturbanceSpec DisturbanceFromJson(const nlohmann::json& doc, const ReactionNetwork& net);

}  // namespace crnobs
