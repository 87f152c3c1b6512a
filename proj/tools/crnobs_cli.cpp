#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crnobs/analysis.hpp"
#include "crnobs/errors.hpp"
#include "crnobs/kinetics.hpp"
#include "crnobs/network.hpp"
#include "crnobs/observers.hpp"
#include "crnobs/ode.hpp"
#include "crnobs/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crnobs {
namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kNegative = 2;

struct CommonFlags {
  std::uint64_t seed = 0;
  std::optional<double> t_end, rtol, atol;
  bool force = false;
  std::string out_dir;
  std::string format = "csv";
  double hurwitz_margin = 0.0;
};

std::vector<double> ToStd(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd ParseVector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (cell.empty() || used != cell.size()) throw ValidationError("bad number '" + cell + "' in '" + text + "'");
    values.push_back(v);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return json::parse(in);
}

// A JSON matrix given inline, as a file holding the matrix, or a file with an
// "output_map" key.
OutputMap LoadOutputMap(const std::string& arg) {
  json doc;
  if (!arg.empty() && arg.front() == '[') {
    doc = json::parse(arg);
  } else {
    doc = ReadJsonFile(arg);
    if (doc.is_object()) doc = doc.at("output_map");
  }
  const auto rows = doc.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ValidationError("output map is empty");
  Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DimensionMismatch("output map rows differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return OutputMap(c);
}

SimConfig ApplyFlags(SimConfig cfg, const CommonFlags& flags, bool seed_given) {
  if (seed_given) cfg.seed = flags.seed;
  if (flags.t_end) cfg.t_end = *flags.t_end;
  if (flags.rtol) cfg.rtol = *flags.rtol;
  if (flags.atol) cfg.atol = *flags.atol;
  cfg.Validate();
  return cfg;
}

fs::path OutDir(const CommonFlags& flags) {
  const fs::path dir = flags.out_dir.empty() ? fs::path(".") : fs::path(flags.out_dir);
  fs::create_directories(dir);
  return dir;
}

json TrajectoryJson(const Trajectory& traj, const std::vector<std::string>& columns) {
  json rows = json::array();
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<double> row{traj.times[i]};
    for (Eigen::Index k = 0; k < traj.states[i].size(); ++k) row.push_back(traj.states[i][k]);
    rows.push_back(row);
  }
  std::vector<std::string> header{"t"};
  header.insert(header.end(), columns.begin(), columns.end());
  return {{"columns", header}, {"rows", rows}};
}

void WriteTrajectory(const Trajectory& traj, const std::vector<std::string>& columns,
                     const fs::path& stem, const std::string& format) {
  if (format == "json") {
    std::ofstream out(stem.string() + ".json");
    out << TrajectoryJson(traj, columns).dump() << '\n';
    if (!out) throw Error("failed to write '" + stem.string() + ".json'");
  } else {
    ExportCsv(traj, columns, stem.string() + ".csv");
  }
}

json TerminationJson(const Trajectory& t) {
  json j = {{"termination", ToString(t.termination)},
            {"accepted_steps", t.accepted_steps},
            {"rejected_steps", t.rejected_steps}};
  if (!std::isnan(t.event_time)) j["event_time"] = t.event_time;
  if (!t.message.empty()) j["message"] = t.message;
  return j;
}

json VerdictJson(const Verdict& v) {
  return {{"converged", v.converged},
          {"diverged", v.diverged},
          {"reason", v.reason},
          {"initial_error", v.initial_error},
          {"final_error", v.final_error},
          {"max_error", v.max_error}};
}

void Emit(const json& doc) { std::cout << doc.dump(2) << std::endl; }

int CmdCheck(const std::string& network_file, const std::string& output_arg) {
  const ReactionNetwork net = LoadNetwork(network_file);
  const OutputMap c = LoadOutputMap(output_arg);
  const DetectabilityReport report = CheckDetectability(net, c);
  Emit(ToJson(report));
  return report.detectable ? kOk : kNegative;
}

int CmdEquilibrium(const std::string& network_file, const std::string& x0_text) {
  const ReactionNetwork net = LoadNetwork(network_file);
  const Equilibrium eq = FindEquilibrium(net, ParseVector(x0_text));
  Emit({{"species", net.species()},
        {"x_bar", ToStd(eq.x_bar)},
        {"residual", eq.residual},
        {"conserved", ToStd(eq.class_tag)}});
  return kOk;
}

int CmdSimulate(const std::string& network_file, const std::string& x0_text,
                const CommonFlags& flags, bool seed_given) {
  const ReactionNetwork net = LoadNetwork(network_file);
  const Eigen::VectorXd x0 = ParseVector(x0_text);
  if (x0.size() != net.num_species()) throw DimensionMismatch("x0 needs one entry per species");
  const SimConfig cfg = ApplyFlags(SimConfig{}, flags, seed_given);
  IntegrateHooks hooks;
  hooks.guarded.assign(static_cast<std::size_t>(net.num_species()), true);
  const Trajectory traj =
      Integrate([&](double, const Eigen::VectorXd& x) { return EvalF(net, x); }, x0, cfg, hooks);
  const fs::path dir = OutDir(flags);
  WriteTrajectory(traj, net.species(), dir / "plant", flags.format);
  json summary = TerminationJson(traj);
  summary["final_state"] = ToStd(traj.final_state());
  summary["conserved_initial"] = ToStd(ConservedQuantities(net, x0));
  summary["conserved_final"] = ToStd(ConservedQuantities(net, traj.final_state()));
  Emit(summary);
  return kOk;
}

std::vector<std::string> Prefixed(const std::string& prefix, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(prefix + n);
  return out;
}

// Luenberger gains are checked at the equilibrium of the plant's class.
std::optional<json> HurwitzJson(const ExperimentConfig& cfg, const ObserverSpec& spec, double margin) {
  const auto* l = std::get_if<LuenbergerObserver>(&spec.kind());
  if (!l) return std::nullopt;
  const Equilibrium eq = FindEquilibrium(cfg.net, cfg.x0);
  const HurwitzReport r = CheckHurwitz(cfg.net, cfg.c, eq.x_bar, l->l, margin);
  if (!r.hurwitz) {
    std::cerr << "warning: F(x_bar) - L H(x_bar) is not Hurwitz for '" << spec.label() << "'\n";
  }
  return json{{"hurwitz", r.hurwitz}, {"eigen_real_parts", r.eigen_real_parts}, {"margin", margin}};
}

struct RunOutcome {
  ExperimentResult result;
  Verdict verdict;
};

RunOutcome RunOne(const ExperimentConfig& cfg, const ObserverSpec& spec, const SimConfig& sim,
                  bool force) {
  RunOutcome out{RunExperiment(cfg.net, cfg.c, cfg.x0, spec, cfg.z0, cfg.noise, cfg.disturbance,
                               sim, {.force = force}),
                 {}};
  const Trajectory& j = out.result.joint;
  if (spec.is_log() && j.termination == Termination::kDomainExit &&
      j.message.find("positive output") != std::string::npos) {
    throw DomainError(j.message);
  }
  out.verdict = Judge(out.result, cfg.threshold);
  return out;
}

void WriteExperiment(const ExperimentResult& r, const fs::path& dir, const std::string& stem,
                     const std::string& format, bool split) {
  if (format == "json") {
    json doc = TrajectoryJson(r.joint, {});
    std::vector<std::string> cols{"t", "err"};
    for (const auto& s : Prefixed("x_", r.species)) cols.push_back(s);
    for (const auto& s : Prefixed("z_", r.species)) cols.push_back(s);
    json rows = json::array();
    for (std::size_t i = 0; i < r.joint.times.size(); ++i) {
      std::vector<double> row{r.joint.times[i], r.error[i]};
      for (int k = 0; k < 2 * r.n; ++k) row.push_back(r.joint.states[i][k]);
      rows.push_back(row);
    }
    std::ofstream out(dir / (stem + ".json"));
    out << json{{"columns", cols}, {"rows", rows}}.dump() << '\n';
    if (!out) throw Error("failed to write '" + (dir / (stem + ".json")).string() + "'");
    return;
  }
  ExportCsv(r, dir / (stem + ".csv"));
  if (!split) return;
  ExportCsv(r.Plant(), r.species, dir / "plant.csv");
  ExportCsv(r.Observer(), r.species, dir / "observer.csv");
  Trajectory err;
  err.times = r.joint.times;
  for (double e : r.error) err.states.push_back(Eigen::VectorXd::Constant(1, e));
  ExportCsv(err, {"err"}, dir / "error.csv");
}

json OutcomeJson(const RunOutcome& o, const ObserverSpec& spec) {
  json j = {{"observer", spec.label()},
            {"type", spec.type_name()},
            {"verdict", VerdictJson(o.verdict)},
            {"run", TerminationJson(o.result.joint)},
            {"observer_left_orthant", o.result.observer_left_orthant},
            {"final_estimate", ToStd(o.result.Observer().final_state())},
            {"final_plant", ToStd(o.result.Plant().final_state())}};
  return j;
}

ExperimentConfig LoadConfig(const std::string& path, const std::string& z0_text) {
  ExperimentConfig cfg = LoadExperimentConfig(path);
  if (!z0_text.empty()) {
    cfg.z0 = ParseVector(z0_text);
    if (cfg.z0.size() != cfg.net.num_species()) throw DimensionMismatch("--z0 needs one entry per species");
  }
  return cfg;
}

int CmdObserve(const std::string& config, const std::string& z0_text, const CommonFlags& flags,
               bool seed_given) {
  const ExperimentConfig cfg = LoadConfig(config, z0_text);
  const SimConfig sim = ApplyFlags(cfg.sim, flags, seed_given);
  const ObserverSpec& spec = cfg.observers.front();
  if (cfg.observers.size() > 1) {
    std::cerr << "note: observe runs the first observer; use compare for all of them\n";
  }
  if (flags.force && !CheckDetectability(cfg.net, cfg.c).detectable) {
    std::cerr << "warning: output map is not detectable; convergence is not guaranteed\n";
  }
  const RunOutcome o = RunOne(cfg, spec, sim, flags.force);
  const fs::path dir = OutDir(flags);
  WriteExperiment(o.result, dir, "experiment", flags.format, true);
  json summary = OutcomeJson(o, spec);
  summary["converged"] = o.verdict.converged;
  summary["final_error"] = o.verdict.final_error;
  summary["threshold"] = cfg.threshold;
  summary["seed"] = sim.seed;
  summary["t_end"] = sim.t_end;
  if (auto h = HurwitzJson(cfg, spec, flags.hurwitz_margin)) summary["hurwitz"] = *h;
  Emit(summary);
  return kOk;
}

std::string FileStem(const std::string& label, std::size_t index) {
  std::string s;
  for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return std::to_string(index) + "_" + s;
}

int CmdCompare(const std::string& config, const std::string& z0_text, const CommonFlags& flags,
               bool seed_given) {
  const ExperimentConfig cfg = LoadConfig(config, z0_text);
  if (cfg.observers.size() < 2) throw ValidationError("compare needs at least two observers");
  const SimConfig sim = ApplyFlags(cfg.sim, flags, seed_given);
  std::vector<std::future<RunOutcome>> runs;
  for (const ObserverSpec& spec : cfg.observers) {
    runs.push_back(std::async(std::launch::async,
                              [&cfg, &spec, &sim, &flags] { return RunOne(cfg, spec, sim, flags.force); }));
  }
  const fs::path dir = OutDir(flags);
  json table = json::array();
  std::vector<std::pair<double, std::string>> ranking;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunOutcome o = runs[i].get();
    const ObserverSpec& spec = cfg.observers[i];
    WriteExperiment(o.result, dir, FileStem(spec.label(), i), flags.format, false);
    json row = OutcomeJson(o, spec);
    if (auto h = HurwitzJson(cfg, spec, flags.hurwitz_margin)) row["hurwitz"] = *h;
    table.push_back(row);
    ranking.emplace_back(o.verdict.final_error, spec.label());
  }
  std::stable_sort(ranking.begin(), ranking.end());
  json ranked = json::array();
  for (const auto& [err, label] : ranking) ranked.push_back({{"observer", label}, {"final_error", err}});
  Emit({{"z0", ToStd(cfg.z0)},
        {"threshold", cfg.threshold},
        {"seed", sim.seed},
        {"observers", table},
        {"ranking", ranked}});
  return kOk;
}

int CmdDemoBlowup(double eps, const std::string& x0_text, const CommonFlags& flags) {
  SimConfig cfg;
  cfg.t_end = flags.t_end.value_or(20.0);
  cfg.record_stride = 0.01;
  if (flags.rtol) cfg.rtol = *flags.rtol;
  if (flags.atol) cfg.atol = *flags.atol;
  const Eigen::VectorXd x0 = ParseVector(x0_text);
  const BlowupResult r = BlowupDemo(eps, x0, cfg);
  const Trajectory log = BlowupLogCounterpart(eps, x0, cfg);
  if (!flags.out_dir.empty()) {
    const fs::path dir = OutDir(flags);
    Trajectory bound;
    bound.times = r.bound_times;
    for (std::size_t i = 0; i < r.bound_times.size(); ++i) {
      bound.states.push_back(Eigen::Vector2d(r.sum_series[i], r.bound_series[i]));
    }
    WriteTrajectory(r.trajectory, {"x1", "x2", "x3"}, dir / "blowup", flags.format);
    WriteTrajectory(bound, {"x1_plus_x3", "w"}, dir / "bound", flags.format);
    WriteTrajectory(log, {"z1", "z2", "z3"}, dir / "log_counterpart", flags.format);
  }
  json doc = {{"eps", eps},
              {"input", {-eps / 4, -eps / 4}},
              {"escape_detected", r.escape_detected},
              {"comparison_escape_time", r.comparison_escape_time},
              {"max_bound_violation", r.max_bound_violation},
              {"run", TerminationJson(r.trajectory)},
              {"log_counterpart", TerminationJson(log)}};
  if (r.escape_detected) doc["escape_time"] = r.escape_time;
  Emit(doc);
  return kOk;
}

}  // namespace
}  // namespace crnobs

int main(int argc, char** argv) {
  using namespace crnobs;
  CLI::App app{"Observers for mass-action chemical reaction networks"};
  app.require_subcommand(1);
  CommonFlags flags;
  app.add_option("--seed", flags.seed, "Random seed (default 0)");
  app.add_option("--t-end", flags.t_end, "Simulation horizon");
  app.add_option("--rtol", flags.rtol, "Relative tolerance");
  app.add_option("--atol", flags.atol, "Absolute tolerance");
  app.add_flag("--force", flags.force, "Run even if the output map is not detectable");
  app.add_option("--out", flags.out_dir, "Output directory for data files");
  app.add_option("--format", flags.format, "Data file format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--hurwitz-margin", flags.hurwitz_margin, "Required stability margin for Luenberger gains");

  std::string network, output, x0, config, z0;
  double eps = 0.4;

  auto* check = app.add_subcommand("check", "Detectability of an output map");
  check->add_option("network", network, "Network DSL file")->required();
  check->add_option("output_map", output, "Output map: JSON matrix, or a JSON file")->required();

  auto* equilibrium = app.add_subcommand("equilibrium", "Positive equilibrium in the class of x0");
  equilibrium->add_option("network", network)->required();
  equilibrium->add_option("--x0", x0, "Comma separated initial state")->required();

  auto* simulate = app.add_subcommand("simulate", "Integrate the plant");
  simulate->add_option("network", network)->required();
  simulate->add_option("--x0", x0, "Comma separated initial state")->required();

  auto* observe = app.add_subcommand("observe", "Run one observer experiment");
  observe->add_option("config", config, "Experiment JSON")->required();
  observe->add_option("--z0", z0, "Override the observer initial state");

  auto* compare = app.add_subcommand("compare", "Run every observer of a config on the same plant");
  compare->add_option("config", config, "Experiment JSON")->required();
  compare->add_option("--z0", z0, "Override the observer initial state");

  auto* blowup = app.add_subcommand("demo-blowup", "Finite escape under negative input");
  blowup->add_option("--eps", eps, "Input deficit (default 0.4)");
  x0 = "1,1,1";
  blowup->add_option("--x0", x0, "Initial state (default 1,1,1)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? kOk : kError;
  }

  const bool seed_given = app.count("--seed") > 0;
  try {
    if (*check) return CmdCheck(network, output);
    if (*equilibrium) return CmdEquilibrium(network, x0);
    if (*simulate) return CmdSimulate(network, x0, flags, seed_given);
    if (*observe) return CmdObserve(config, z0, flags, seed_given);
    if (*compare) return CmdCompare(config, z0, flags, seed_given);
    if (*blowup) return CmdDemoBlowup(eps, x0, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}
