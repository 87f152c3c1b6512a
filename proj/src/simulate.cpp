#include "crnobs/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "crnobs/analysis.hpp"
#include "crnobs/errors.hpp"

namespace crnobs {

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform on [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
double Canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double StandardNormal(std::mt19937_64& rng) {
  const double u1 = 1.0 - Canonical(rng);  // (0, 1]
  const double u2 = Canonical(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void NoiseSpec::Validate() const {
  if (!(amplitude >= 0) || !std::isfinite(amplitude)) {
    throw ValidationError("noise amplitude must be finite and nonnegative");
  }
}

Eigen::VectorXd NoiseSample(const NoiseSpec& spec, std::uint64_t seed, long interval, int p) {
  spec.Validate();
  Eigen::VectorXd n = Eigen::VectorXd::Zero(p);
  if (spec.kind == NoiseSpec::Kind::kNone || spec.amplitude == 0.0 || p == 0) return n;
  std::mt19937_64 rng(SplitMix64(seed ^ SplitMix64(static_cast<std::uint64_t>(interval))));
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < p; ++i) n[i] = StandardNormal(rng);
    norm = n.norm();
  }
  const double radius = spec.amplitude * std::pow(Canonical(rng), 1.0 / p);  // < amplitude
  return n * (radius / norm);
}

Eigen::VectorXd NoiseSignal(const NoiseSpec& spec, std::uint64_t seed, double t, int p,
                            double stride) {
  if (!(stride > 0)) throw ValidationError("noise stride must be positive");
  return NoiseSample(spec, seed, static_cast<long>(std::floor(t / stride)), p);
}

DisturbanceSpec DisturbanceSpec::Resolved(int n, double max_step) const {
  DisturbanceSpec out = *this;
  if (empty()) return out;
  if (channel >= n) throw ValidationError("disturbance channel out of range");
  for (Pulse& p : out.pulses) {
    if (p.width == 0.0) {
      if (!std::isfinite(max_step)) {
        throw ValidationError("a pulse without width needs a finite sim.max_step");
      }
      p.width = 20 * max_step;
    }
    if (!(p.width > 0) || !std::isfinite(p.width)) throw ValidationError("pulse widths must be positive");
  }
  return out;
}

Eigen::VectorXd DisturbanceSignal(const DisturbanceSpec& spec, double t, int n) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (spec.empty()) return d;
  d[spec.channel] = spec.amp * std::sin(2 * std::numbers::pi * spec.freq * t + spec.phase) +
                    PulseLevel(spec, t);
  return d;
}

double PulseLevel(const DisturbanceSpec& spec, double t) {
  double v = 0.0;
  for (const Pulse& p : spec.pulses) {
    const double lo = p.center - p.width / 2;
    if (t >= lo && t < lo + p.width) v += p.height;
  }
  return v;
}

std::vector<double> PulseEdges(const DisturbanceSpec& spec) {
  std::vector<double> edges;
  for (const Pulse& p : spec.pulses) {
    edges.push_back(p.center - p.width / 2);
    edges.push_back(p.center - p.width / 2 + p.width);
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

Trajectory ExperimentResult::Plant() const {
  Trajectory out = joint;
  for (auto& s : out.states) s = Eigen::VectorXd(s.head(n));
  return out;
}

Trajectory ExperimentResult::Observer() const {
  Trajectory out = joint;
  for (auto& s : out.states) s = Eigen::VectorXd(s.segment(n, n));
  return out;
}

ExperimentResult RunExperiment(const ReactionNetwork& net, const OutputMap& c,
                               const Eigen::VectorXd& x0, const ObserverSpec& spec,
                               const Eigen::VectorXd& z0, const NoiseSpec& noise,
                               const DisturbanceSpec& dist, const SimConfig& cfg_in,
                               const ExperimentOptions& opts) {
  const int n = net.num_species();
  const int p = c.num_outputs();
  if (x0.size() != n || z0.size() != n) throw DimensionMismatch("x0 and z0 must have n entries");
  if (!(x0.array() > 0).all()) throw DomainError("plant x0 must be strictly positive");
  noise.Validate();
  const bool steering = std::holds_alternative<SteeringFeedback>(spec.kind());
  if (!opts.force && !steering && !CheckDetectability(net, c).detectable) {
    throw PreconditionError("output map is not detectable; pass force to run anyway");
  }

  SimConfig cfg = cfg_in;
  const DisturbanceSpec d = dist.Resolved(n, cfg.max_step);
  cfg.Validate();

  auto sample = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& nz) {
    Eigen::VectorXd y = EvalH(c, x) + nz;
    if (noise.guard) y = y.cwiseMax(kOutputFloor);
    return y;
  };
  if (spec.is_log()) {
    const Eigen::VectorXd y0 = sample(x0, NoiseSample(noise, cfg.seed, 0, p));
    for (int i = 0; i < p; ++i) {
      if (!(y0[i] > 0)) {
        throw DomainError("log observer needs a positive output sample, y_" + std::to_string(i) +
                          " = " + std::to_string(y0[i]) + " at t = 0");
      }
    }
  }

  const int m = spec.state_size();
  Eigen::VectorXd s0(n + m);
  s0.head(n) = x0;
  s0.tail(m) = spec.PackInitial(z0);

  Eigen::VectorXd current_noise = Eigen::VectorXd::Zero(p);
  ExperimentResult result;
  result.species = net.species();
  result.observer_label = spec.label();
  result.n = n;

  IntegrateHooks hooks;
  hooks.guarded.assign(static_cast<std::size_t>(n + m), false);
  std::fill(hooks.guarded.begin(), hooks.guarded.begin() + n, true);
  // Main and weighted estimates stay positive from a positive start when y >= 0,
  // so a crossing is integration error and is rejected like one.
  const bool output_nonnegative = noise.kind == NoiseSpec::Kind::kNone || noise.amplitude == 0 || noise.guard;
  const bool positive_estimate =
      spec.is_log() || ((std::holds_alternative<MainObserver>(spec.kind()) ||
                         std::holds_alternative<WeightedObserver>(spec.kind())) &&
                        output_nonnegative && (z0.array() > 0).all());
  if (positive_estimate) std::fill(hooks.guarded.begin() + n, hooks.guarded.begin() + 2 * n, true);
  hooks.segment_start = [&](int k) { current_noise = NoiseSample(noise, cfg.seed, k, p); };
  // pulses are held constant between their edges so no step sees a jump
  double pulse_level = 0.0;
  if (!d.empty() && !d.pulses.empty()) {
    hooks.breakpoints = PulseEdges(d);
    hooks.interval_start = [&](double lo, double hi) { pulse_level = PulseLevel(d, (lo + hi) / 2); };
  }
  DisturbanceSpec periodic = d;
  periodic.pulses.clear();
  hooks.post_step = [&](Eigen::VectorXd& s) {
    Eigen::VectorXd obs = s.tail(m);
    spec.PostStep(obs);
    s.tail(m) = obs;
    if ((s.segment(n, n).array() < 0).any()) result.observer_left_orthant = true;
  };

  const Rhs rhs = [&](double t, const Eigen::VectorXd& s) {
    const Eigen::VectorXd x = s.head(n);
    Eigen::VectorXd ds(n + m);
    ds.head(n) = EvalF(net, x) + DisturbanceSignal(periodic, t, n);
    if (pulse_level != 0.0) ds[d.channel] += pulse_level;
    try {
      ds.tail(m) = spec.Rhs(s.tail(m), sample(x, current_noise));
    } catch (const DomainError& e) {
      throw DomainError(std::string("observer: ") + e.what(),
                        e.coordinate() < 0 ? -1 : n + e.coordinate());
    } catch (const OverflowError& e) {
      throw OverflowError(std::string("observer: ") + e.what());
    }
    return ds;
  };

  result.joint = Integrate(rhs, s0, cfg, hooks);
  result.error.reserve(result.joint.states.size());
  for (std::size_t i = 0; i < result.joint.states.size(); ++i) {
    const Eigen::VectorXd& s = result.joint.states[i];
    result.error.push_back((s.segment(n, n) - s.head(n)).norm());
    if (std::isnan(result.observer_exit_time) && (s.segment(n, n).array() < 0).any()) {
      result.observer_exit_time = result.joint.times[i];
    }
  }
  return result;
}

Verdict Judge(const ExperimentResult& result, double threshold) {
  Verdict v;
  if (result.error.empty()) throw PreconditionError("empty experiment");
  v.initial_error = result.error.front();
  v.final_error = result.error.back();
  v.max_error = *std::max_element(result.error.begin(), result.error.end());
  const Termination term = result.joint.termination;
  if (term != Termination::kTimeEnd && term != Termination::kConverged) {
    v.reason = "terminated";
  } else if (v.final_error <= threshold) {
    v.reason = "converged";
  } else if (v.max_error > 10 * v.initial_error) {
    v.reason = "growth";
  } else if (v.final_error > v.initial_error) {
    v.reason = "final_above_initial";
  } else {
    v.reason = "not_converged";
  }
  v.converged = v.reason == "converged";
  v.diverged = !v.converged;
  return v;
}

ReactionNetwork BlowupNetwork() { return ParseNetwork("A + B <-> C [1, 1]\n"); }

OutputMap BlowupOutput() {
  Eigen::MatrixXd c(2, 3);
  c << 2, 0, 0, 0, 0, 2;
  return OutputMap(c);
}

double ComparisonEscapeTime(double eps, double w0) {
  if (!(eps > 0)) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(2 * eps);
  return 2 / s * (std::atan(w0 / s) + std::numbers::pi / 2);
}

BlowupResult BlowupDemo(double eps, const Eigen::VectorXd& x0, const SimConfig& cfg) {
  if (!(eps >= 0)) throw ValidationError("eps must be nonnegative");
  if (x0.size() != 3) throw DimensionMismatch("blow-up demo needs a 3-vector");
  const ReactionNetwork net = BlowupNetwork();
  const OutputMap c = BlowupOutput();
  const Eigen::Vector2d u = Eigen::Vector2d::Constant(-eps / 4);

  BlowupResult out;
  out.trajectory =
      Integrate([&](double, const Eigen::VectorXd& z) { return MainRhs(net, c, z, u); }, x0, cfg);
  out.escape_detected = out.trajectory.termination == Termination::kFiniteEscape;
  if (out.escape_detected) out.escape_time = out.trajectory.event_time;

  const double w0 = x0[0] + x0[2];
  out.comparison_escape_time = ComparisonEscapeTime(eps, w0);
  const Trajectory w = Integrate(
      [&](double, const Eigen::VectorXd& v) {
        return Eigen::VectorXd::Constant(1, -eps - v[0] * v[0] / 2);
      },
      Eigen::VectorXd::Constant(1, w0), cfg);

  // both runs share the record grid; an escaped run ends with one off-grid sample
  auto grid_size = [](const Trajectory& t) {
    return t.termination == Termination::kTimeEnd ? t.times.size() : t.times.size() - 1;
  };
  const std::size_t count = std::min(grid_size(out.trajectory), grid_size(w));
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::VectorXd& z = out.trajectory.states[i];
    out.bound_times.push_back(out.trajectory.times[i]);
    out.sum_series.push_back(z[0] + z[2]);
    out.bound_series.push_back(w.states[i][0]);
    out.max_bound_violation = std::max(out.max_bound_violation, z[0] + z[2] - w.states[i][0]);
  }
  return out;
}

Trajectory BlowupLogCounterpart(double eps, const Eigen::VectorXd& x0, const SimConfig& cfg) {
  const ReactionNetwork net = BlowupNetwork();
  const OutputMap c = BlowupOutput();
  const Eigen::Vector2d u = Eigen::Vector2d::Constant(-eps / 4);
  IntegrateHooks hooks;
  hooks.guarded.assign(3, true);
  return Integrate(
      [&](double, const Eigen::VectorXd& z) {
        return Eigen::VectorXd(EvalF(net, z) + c.matrix().transpose() * (u - EvalHLog(c, z)));
      },
      x0, cfg, hooks);
}

namespace {

std::FILE* OpenForWrite(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  return f;
}

void Close(std::FILE* f, const std::filesystem::path& path) {
  if (std::fclose(f) != 0) throw Error("failed to write '" + path.string() + "'");
}

}  // namespace

void ExportCsv(const Trajectory& traj, const std::vector<std::string>& species,
               const std::filesystem::path& path) {
  std::FILE* f = OpenForWrite(path);
  std::fputs("t", f);
  for (const auto& s : species) std::fprintf(f, ",%s", s.c_str());
  std::fputc('\n', f);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::fprintf(f, "%.17g", traj.times[i]);
    const Eigen::VectorXd& x = traj.states[i];
    for (Eigen::Index k = 0; k < x.size(); ++k) std::fprintf(f, ",%.17g", x[k]);
    std::fputc('\n', f);
  }
  Close(f, path);
}

void ExportCsv(const ExperimentResult& result, const std::filesystem::path& path) {
  std::FILE* f = OpenForWrite(path);
  std::fputs("t,err", f);
  for (const auto& s : result.species) std::fprintf(f, ",x_%s", s.c_str());
  for (const auto& s : result.species) std::fprintf(f, ",z_%s", s.c_str());
  std::fputc('\n', f);
  const int n = result.n;
  for (std::size_t i = 0; i < result.joint.times.size(); ++i) {
    std::fprintf(f, "%.17g,%.17g", result.joint.times[i], result.error[i]);
    const Eigen::VectorXd& s = result.joint.states[i];
    for (int k = 0; k < 2 * n; ++k) std::fprintf(f, ",%.17g", s[k]);
    std::fputc('\n', f);
  }
  Close(f, path);
}

CsvTable ReadCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) return table;
  table.header = split(line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ParseError("bad number '" + cell + "' in " + path.string(), line_no, 1);
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      throw ParseError("row width differs from header in " + path.string(), line_no, 1);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

Eigen::VectorXd VectorFrom(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of numbers");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd MatrixFrom(const nlohmann::json& j, const char* what) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ValidationError(std::string(what) + " is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DimensionMismatch(std::string(what) + " is ragged");
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

ReactionNetwork NetworkFrom(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.is_object()) return NetworkFromJson(j);
  const std::string s = j.get<std::string>();
  if (s.find("->") != std::string::npos) return ParseNetwork(s);
  std::filesystem::path p(s);
  if (p.is_relative()) p = base_dir / p;
  return LoadNetwork(p.string());
}

}  // namespace

SimConfig SimConfigFromJson(const nlohmann::json& doc, SimConfig cfg) {
  for (const auto& [key, value] : doc.items()) {
    if (key == "t_end") cfg.t_end = value.get<double>();
    else if (key == "rtol") cfg.rtol = value.get<double>();
    else if (key == "atol") cfg.atol = value.get<double>();
    else if (key == "max_step") cfg.max_step = value.get<double>();
    else if (key == "min_step") cfg.min_step = value.get<double>();
    else if (key == "positivity_floor") cfg.positivity_floor = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "record_stride") cfg.record_stride = value.get<double>();
    else if (key == "escape_norm") cfg.escape_norm = value.get<double>();
    else if (key == "max_steps") cfg.max_steps = value.get<long>();
    else throw ValidationError("unknown sim key '" + key + "'");
  }
  cfg.Validate();
  return cfg;
}

NoiseSpec NoiseFromJson(const nlohmann::json& doc) {
  NoiseSpec spec;
  const std::string kind = doc.value("kind", std::string("bounded_white"));
  if (kind == "none") {
    spec.kind = NoiseSpec::Kind::kNone;
  } else if (kind == "bounded_white") {
    spec.kind = NoiseSpec::Kind::kBoundedWhite;
  } else {
    throw ValidationError("unknown noise kind '" + kind + "'");
  }
  spec.amplitude = doc.value("amplitude", 0.0);
  spec.guard = doc.value("guard", true);
  spec.Validate();
  return spec;
}

DisturbanceSpec DisturbanceFromJson(const nlohmann::json& doc, const ReactionNetwork& net) {
  DisturbanceSpec d;
  const auto& ch = doc.at("channel");
  if (ch.is_string()) {
    d.channel = net.species_index(ch.get<std::string>());
    if (d.channel < 0) throw ValidationError("unknown disturbance channel '" + ch.get<std::string>() + "'");
  } else {
    d.channel = ch.get<int>();
  }
  if (d.channel < 0 || d.channel >= net.num_species()) {
    throw ValidationError("disturbance channel out of range");
  }
  if (doc.contains("periodic")) {
    const auto& per = doc["periodic"];
    d.amp = per.value("amp", 0.0);
    d.freq = per.value("freq", 0.0);
    d.phase = per.value("phase", 0.0);
  }
  if (doc.contains("pulses")) {
    for (const auto& p : doc["pulses"]) {
      Pulse pulse{p.at("center").get<double>(), p.value("width", 0.0), 0.0};
      if (p.contains("area")) {
        if (pulse.width == 0.0) throw ValidationError("a pulse given by area needs a width");
        pulse.height = p["area"].get<double>() / pulse.width;
      } else {
        pulse.height = p.at("height").get<double>();
      }
      d.pulses.push_back(pulse);
    }
  }
  return d;
}

ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& doc,
                                          const std::filesystem::path& base_dir) {
  ReactionNetwork net = NetworkFrom(doc.at("network"), base_dir);
  OutputMap c(MatrixFrom(doc.at("output_map"), "output_map"));
  std::vector<ObserverSpec> observers;
  if (doc.contains("observers")) {
    for (const auto& o : doc["observers"]) observers.push_back(ObserverFromJson(o, net, c));
  } else {
    observers.push_back(ObserverFromJson(doc.value("observer", nlohmann::json{{"type", "main"}}), net, c));
  }
  NoiseSpec noise;
  if (doc.contains("noise")) noise = NoiseFromJson(doc["noise"]);
  DisturbanceSpec dist;
  if (doc.contains("disturbance")) dist = DisturbanceFromJson(doc["disturbance"], net);
  SimConfig sim = doc.contains("sim") ? SimConfigFromJson(doc["sim"]) : SimConfig{};
  Eigen::VectorXd x0 = VectorFrom(doc.at("x0"), "x0");
  Eigen::VectorXd z0 = VectorFrom(doc.at("z0"), "z0");
  if (x0.size() != net.num_species() || z0.size() != net.num_species()) {
    throw DimensionMismatch("x0 and z0 must have one entry per species");
  }
  const double threshold = doc.value("threshold", 1e-6);
  return ExperimentConfig{std::move(net), std::move(c), std::move(observers), std::move(x0),
                          std::move(z0), noise, dist, sim, threshold};
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0, static_cast<int>(e.byte));
  }
  return ExperimentConfigFromJson(doc, path.parent_path());
}

}  // namespace crnobs
