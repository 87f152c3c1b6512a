// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crnobs/analysis.hpp"
#include "crnobs/errors.hpp"
#include "crnobs/kinetics.hpp"
#include "crnobs/lyapunov.hpp"
#include "crnobs/network.hpp"
#include "crnobs/observers.hpp"
#include "crnobs/ode.hpp"
#include "crnobs/simulate.hpp"

namespace fs = std::filesystem;
using namespace crnobs;

namespace {

const fs::path kConfigs = CRNOBS_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ReactionNetwork McKeithan() { return LoadNetwork((kConfigs / "mckeithan.crn").string()); }
ReactionNetwork TwoSpecies() { return LoadNetwork((kConfigs / "two_species.crn").string()); }

OutputMap Output(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index k = 0;
    for (double v : r) c(i, k++) = v;
    ++i;
  }
  return OutputMap(c);
}

OutputMap McKeithanOutput() { return Output({{1, 2, 0, 0}, {1, 0, 0, 1}}); }

std::string Fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

Eigen::VectorXd LogUniformAround(const Eigen::VectorXd& centre, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-std::log(10.0), std::log(10.0));
  Eigen::VectorXd z(centre.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = centre[i] * std::exp(u(rng));
  return z;
}

Eigen::VectorXd McKeithanEquilibrium() {
  return FindEquilibrium(McKeithan(), Eigen::Vector4d(3, 2, 3, 20)).x_bar;
}

Outcome Ac1() {
  const ReactionNetwork mck = McKeithan();
  const ReactionNetwork enzyme = LoadNetwork((kConfigs / "enzyme.crn").string());
  const bool a = CheckDetectability(mck, Output({{1, 0, 0, 0}, {0, 0, 0, 1}})).detectable;
  const bool b = CheckDetectability(mck, McKeithanOutput()).detectable;
  const bool c = CheckDetectability(mck, Output({{1, 0, 0, 0}})).detectable;
  const DetectabilityReport d = CheckDetectability(
      enzyme, Output({{2, 0, 1, 0, 0, 0}, {0, 0, 0, 1, 0, 2}, {0, 0, 0, 0, 1, 0}}));
  const bool ok = a && b && !c && d.detectable && d.p == 3 && d.required_outputs == 3;
  return {ok, Fmt("verdicts (x1,x4)=%g (x1x2^2,x1x4)=%g (x1)=%g", a, b, c) +
                  Fmt(" enzyme=%g p=%g n-(m-L)=%g", d.detectable, d.p, d.required_outputs)};
}

Outcome Ac2() {
  const ReactionNetwork net = TwoSpecies();
  const Equilibrium eq = FindEquilibrium(net, Eigen::Vector2d(0.3, 4.7));
  const double dist = (eq.x_bar - Eigen::Vector2d(4, 1)).norm();
  const double res = EvalF(net, eq.x_bar).norm();
  return {dist <= 1e-8 && res <= 1e-10, Fmt("|x_bar-(4,1)|=%.2e |f(x_bar)|=%.2e", dist, res)};
}

ExperimentResult RunConfig(const ExperimentConfig& cfg, std::size_t observer,
                           const NoiseSpec& noise) {
  return RunExperiment(cfg.net, cfg.c, cfg.x0, cfg.observers[observer], cfg.z0, noise,
                       cfg.disturbance, cfg.sim);
}

Outcome Ac3() {
  const ExperimentConfig main_cfg = LoadExperimentConfig(kConfigs / "mckeithan_main.json");
  const ExperimentConfig log_cfg = LoadExperimentConfig(kConfigs / "mckeithan_log.json");
  const ExperimentResult main = RunConfig(main_cfg, 0, main_cfg.noise);
  const ExperimentResult log = RunConfig(log_cfg, 0, log_cfg.noise);
  const std::size_t mid = main.error.size() / 2;
  const bool ok = main.joint.termination == Termination::kTimeEnd &&
                  log.joint.termination == Termination::kTimeEnd && main.error.back() <= 1e-6 &&
                  log.error.back() <= 1e-6 && log.error[mid] >= main.error[mid];
  return {ok, Fmt("t_end=%g final main=%.2e log=%.2e", main_cfg.sim.t_end, main.error.back(),
                  log.error.back()) +
                  Fmt(" midpoint main=%.2e log=%.2e", main.error[mid], log.error[mid])};
}

Outcome Ac4() {
  const ReactionNetwork net = McKeithan();
  const Eigen::VectorXd x_bar = McKeithanEquilibrium();
  const LyapunovContext ctx = LyapunovContext::Make(net, x_bar, McKeithanOutput());
  std::mt19937_64 rng(4);
  double worst = -1e300;
  for (int s = 0; s < 1000; ++s) worst = std::max(worst, Dissipation(ctx, LogUniformAround(x_bar, rng)));
  std::uniform_real_distribution<double> u(-2, 2);
  double worst_zero = 0;
  for (int s = 0; s < 20; ++s) {
    const Eigen::VectorXd z = ShiftEquilibrium(net, x_bar, Eigen::Vector2d(u(rng), u(rng)));
    worst_zero = std::max(worst_zero, std::abs(Dissipation(ctx, z)));
  }
  return {worst <= 1e-12 && worst_zero <= 1e-10,
          Fmt("max over 1000 samples=%.2e, max |.| on 20 shifted equilibria=%.2e", worst, worst_zero)};
}

Outcome Ac5() {
  const Eigen::VectorXd x_bar = McKeithanEquilibrium();
  const LyapunovContext ctx = LyapunovContext::Make(McKeithan(), x_bar, McKeithanOutput());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 40);
  int violations = 0;
  for (int s = 0; s < 1000; ++s) {
    const Eigen::VectorXd z =
        s % 2 ? LogUniformAround(x_bar, rng) : Eigen::VectorXd(Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng)));
    const double r = (z - x_bar).norm();
    const double v = V(ctx, z);
    if (NuLower(ctx, r) > v || v > NuUpper(ctx, r)) ++violations;
  }
  int grid_violations = 0;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      const double a = -0.99 + 10.99 * i / 199.0;
      const double b = -0.99 + 10.99 * j / 199.0;
      const double lhs = std::pow(std::log1p(a), 2) + std::pow(std::log1p(b), 2);
      const double rhs = 0.5 * std::pow(std::log1p(std::hypot(a, b)), 2);
      if (lhs < rhs - 1e-15) ++grid_violations;
    }
  }
  return {violations == 0 && grid_violations == 0,
          Fmt("sandwich violations=%g/1000, grid violations=%g/40000", violations, grid_violations)};
}

Outcome Ac6() {
  const Eigen::VectorXd x_bar = McKeithanEquilibrium();
  const LyapunovContext ctx = LyapunovContext::Make(McKeithan(), x_bar, McKeithanOutput());
  const Eigen::MatrixXd& c = ctx.output().matrix();
  const Eigen::VectorXd h_bar = EvalH(ctx.output(), x_bar);
  const Eigen::VectorXd big_h_bar = EvalHLog(ctx.output(), x_bar);
  std::mt19937_64 rng(6);
  double main_worst = -1e300, identity_worst = 0, gamma_worst = -1e300, const_worst = -1e300;
  std::normal_distribution<double> g(0, 5);
  const double u_max = 10;
  const double bound = BoundedInputConstant(ctx, u_max);
  std::uniform_real_distribution<double> uu(0, u_max);
  for (int s = 0; s < 1000; ++s) {
    const Eigen::VectorXd z = LogUniformAround(x_bar, rng);
    const Eigen::VectorXd grad = GradV(ctx, z);
    main_worst = std::max(main_worst, grad.dot(MainIssField(ctx, z, h_bar)));

    const Eigen::Vector2d u(g(rng), g(rng));
    const Eigen::VectorXd sigma = c * grad;
    const double lhs = grad.dot(LogIssField(ctx, z, u));
    const double diss = Dissipation(ctx, z);
    const double scale = 1 + std::abs(diss) + sigma.squaredNorm();
    const double identity = diss - sigma.squaredNorm() + sigma.dot(u - big_h_bar);
    identity_worst = std::max(identity_worst, std::abs(lhs - identity) / scale);
    gamma_worst = std::max(gamma_worst, (lhs - (diss - 0.5 * sigma.squaredNorm() +
                                                0.5 * (u - big_h_bar).squaredNorm())) / scale);

    const Eigen::Vector2d ub(uu(rng), uu(rng));
    const_worst = std::max(const_worst, grad.dot(MainIssField(ctx, z, ub)) - bound);
  }
  const bool ok = main_worst <= 1e-12 && identity_worst <= 1e-12 && gamma_worst <= 1e-12 &&
                  const_worst <= 0;
  return {ok, Fmt("main max=%.2e, log identity rel err=%.2e, gamma slack=%.2e", main_worst,
                  identity_worst, gamma_worst) +
                  Fmt(", bounded-input c=%.4g max excess=%.3g", bound, const_worst)};
}

Outcome Ac7() {
  const ReactionNetwork net = McKeithan();
  const StoichSubspace sub = StoichBasis(net);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 20);
  SimConfig cfg;
  cfg.t_end = 30;
  IntegrateHooks hooks;
  hooks.guarded.assign(4, true);
  int nonpositive = 0, increases = 0;
  double drift = 0;
  for (int run = 0; run < 50; ++run) {
    const Eigen::Vector4d x0(u(rng), u(rng), u(rng), u(rng));
    const Trajectory traj =
        Integrate([&](double, const Eigen::VectorXd& x) { return EvalF(net, x); }, x0, cfg, hooks);
    const LyapunovContext ctx = LyapunovContext::Make(net, FindEquilibrium(net, x0).x_bar);
    double prev = V(ctx, traj.states.front());
    for (const auto& x : traj.states) {
      if (!(x.array() > 0).all()) ++nonpositive;
      drift = std::max(drift, (sub.q * (x - x0)).cwiseAbs().maxCoeff());
      const double v = V(ctx, x);
      if (v > prev + 1e-9) ++increases;
      prev = v;
    }
    if (traj.termination != Termination::kTimeEnd) ++nonpositive;
  }
  return {nonpositive == 0 && drift <= 1e-8 && increases == 0,
          Fmt("nonpositive samples=%g, max drift=%.2e, V increases=%g", nonpositive, drift, increases)};
}

Outcome Ac8() {
  SimConfig cfg;
  cfg.t_end = 20;
  cfg.record_stride = 0.01;
  const Eigen::Vector3d x0(1, 1, 1);
  const double eps = 0.4;
  const BlowupResult r = BlowupDemo(eps, x0, cfg);
  const Trajectory log = BlowupLogCounterpart(eps, x0, cfg);
  const bool ok = r.escape_detected && r.max_bound_violation <= 1e-6 &&
                  log.termination == Termination::kTimeEnd;
  return {ok, Fmt("escape at t=%.6f (comparison pole %.6f), max (x1+x3)-w=%.2e", r.escape_time,
                  r.comparison_escape_time, r.max_bound_violation) +
                  " log counterpart: " + ToString(log.termination)};
}

Outcome Ac9() {
  struct Case {
    const char* file;
    bool main, ekf, lbg;  // expected divergence flags
  };
  const std::vector<Case> cases = {{"compare_z0_4p4_1p3.json", false, false, false},
                                   {"compare_z0_3_16.json", false, true, true},
                                   {"compare_z0_19_6.json", false, true, true},
                                   {"compare_z0_0p8_0p4.json", false, false, true},
                                   {"compare_z0_6_0p1.json", false, true, false}};
  std::vector<ExperimentConfig> configs;
  for (const Case& c : cases) configs.push_back(LoadExperimentConfig(kConfigs / c.file));
  std::vector<std::future<Verdict>> futures;
  for (const auto& cfg : configs) {
    for (std::size_t o = 0; o < 3; ++o) {
      futures.push_back(std::async(std::launch::async, [&cfg, o] {
        return Judge(RunConfig(cfg, o, cfg.noise), cfg.threshold);
      }));
    }
  }
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const bool expected[3] = {cases[i].main, cases[i].ekf, cases[i].lbg};
    const Eigen::VectorXd& z0 = configs[i].z0;
    detail += Fmt("z0=(%g,%g):", z0[0], z0[1]);
    for (std::size_t o = 0; o < 3; ++o) {
      const Verdict v = futures[3 * i + o].get();
      ok = ok && v.diverged == expected[o];
      detail += std::string(" ") + configs[i].observers[o].label() + "=" + (v.diverged ? "div" : "conv");
    }
    detail += i + 1 < cases.size() ? "; " : "";
  }
  return {ok, detail};
}

struct NoiseStats {
  double mean, max, hf_variance;
};

NoiseStats SteadyStats(const ExperimentResult& r, double t_from) {
  std::vector<double> e;
  for (std::size_t i = 0; i < r.times().size(); ++i) {
    if (r.times()[i] >= t_from) e.push_back(r.error[i]);
  }
  double mean = 0, max = 0;
  for (double v : e) {
    mean += v;
    max = std::max(max, v);
  }
  mean /= static_cast<double>(e.size());
  // variance of successive differences isolates the sample-to-sample jitter
  double dm = 0, dv = 0;
  for (std::size_t i = 1; i < e.size(); ++i) dm += e[i] - e[i - 1];
  dm /= static_cast<double>(e.size() - 1);
  for (std::size_t i = 1; i < e.size(); ++i) dv += std::pow(e[i] - e[i - 1] - dm, 2);
  return {mean, max, dv / static_cast<double>(e.size() - 2)};
}

Outcome Ac10() {
  const ExperimentConfig cfg = LoadExperimentConfig(kConfigs / "mckeithan_noise.json");
  const double transient = cfg.sim.t_end / 2;
  NoiseSpec low = cfg.noise, high = cfg.noise;
  low.amplitude = 0.5;
  high.amplitude = 2.0;
  const NoiseStats main_low = SteadyStats(RunConfig(cfg, 0, low), transient);
  const NoiseStats main_high = SteadyStats(RunConfig(cfg, 0, high), transient);
  const NoiseStats log_high = SteadyStats(RunConfig(cfg, 1, high), transient);
  const bool ok = std::isfinite(main_high.max) && main_high.max < 10 &&
                  main_high.mean > main_low.mean && log_high.hf_variance < main_high.hf_variance;
  return {ok, Fmt("main mean error amp0.5=%.3g amp2=%.3g (max %.3g)", main_low.mean, main_high.mean,
                  main_high.max) +
                  Fmt("; jitter variance main=%.3g log=%.3g", main_high.hf_variance, log_high.hf_variance)};
}

Outcome Ac11() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 5);
  const ReactionNetwork net = McKeithan();
  const OutputMap c = McKeithanOutput();
  double worst_f = 0, worst_h = 0;
  for (int s = 0; s < 200; ++s) {
    const Eigen::Vector4d x(u(rng), u(rng), u(rng), u(rng));
    const Eigen::MatrixXd jf = EvalJacobianF(net, x);
    const Eigen::MatrixXd jh = EvalJacobianH(c, x);
    for (int l = 0; l < 4; ++l) {
      const double step = 1e-6 * x[l];
      Eigen::Vector4d hi = x, lo = x;
      hi[l] += step;
      lo[l] -= step;
      const Eigen::VectorXd df = (EvalF(net, hi) - EvalF(net, lo)) / (2 * step);
      const Eigen::VectorXd dh = (EvalH(c, hi) - EvalH(c, lo)) / (2 * step);
      worst_f = std::max(worst_f, (df - jf.col(l)).cwiseAbs().maxCoeff() / std::max(1.0, jf.cwiseAbs().maxCoeff()));
      worst_h = std::max(worst_h, (dh - jh.col(l)).cwiseAbs().maxCoeff() / std::max(1.0, jh.cwiseAbs().maxCoeff()));
    }
  }
  SimConfig cfg;
  cfg.t_end = 1;
  const Trajectory decay =
      Integrate([](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); },
                Eigen::VectorXd::Ones(1), cfg);
  const double decay_err = std::abs(decay.final_state()[0] - std::exp(-1.0));

  const ExperimentConfig noisy = LoadExperimentConfig(kConfigs / "mckeithan_noise.json");
  SimConfig short_sim = noisy.sim;
  short_sim.t_end = 20;
  auto csv = [&](const std::string& name) {
    const fs::path path = fs::temp_directory_path() / name;
    ExportCsv(RunExperiment(noisy.net, noisy.c, noisy.x0, noisy.observers[0], noisy.z0, noisy.noise,
                            noisy.disturbance, short_sim),
              path);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    fs::remove(path);
    return ss.str();
  };
  const bool same = csv("crnobs_acceptance_a.csv") == csv("crnobs_acceptance_b.csv");
  const bool ok = worst_f <= 1e-6 && worst_h <= 1e-6 && decay_err <= 10 * cfg.rtol && same;
  return {ok, Fmt("jacobian rel err f=%.2e h=%.2e, |x(1)-1/e|=%.2e", worst_f, worst_h, decay_err) +
                  (same ? ", seeded CSVs identical" : ", seeded CSVs differ")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"AC1", "detectability table", 1, Ac1},
      {"AC2", "equilibrium (4,1)", 1, Ac2},
      {"AC3", "main and log observers converge", 10, Ac3},
      {"AC4", "dissipation sign", 0, Ac4},
      {"AC5", "Lyapunov sandwich", 0, Ac5},
      {"AC6", "ISS decrements", 0, Ac6},
      {"AC7", "positivity and conservation", 0, Ac7},
      {"AC8", "blow-up demo", 5, Ac8},
      {"AC9", "baseline comparison", 30, Ac9},
      {"AC10", "noise robustness", 0, Ac10},
      {"AC11", "numerical correctness", 0, Ac11},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      out.pass = false;
      out.detail += Fmt(" [runtime %.2f s exceeds %g s]", secs, c.limit_s);
    }
    if (!out.pass) ++failures;
    std::printf("%-4s %s  %s: %s (%.2f s)\n", c.id, out.pass ? "PASS" : "FAIL", c.name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
