// Acceptance suite: one PASS/FAIL line per criterion. With arguments, runs
// only the listed criteria. Exit status is 1 if any selected criterion fails.

#include "flightopt/cli.hpp"
#include "flightopt/flight_dyn.hpp"
#include "flightopt/flight_opt.hpp"
#include "flightopt/io.hpp"
#include "flightopt/model_io.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

using namespace flightopt;

namespace {

const std::string kConfigs = FLIGHTOPT_CONFIG_DIR;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RobotModelPtr builtin(const std::string& id) { return std::make_shared<const RobotModel>(builtin_model(id)); }

const std::map<std::string, cli::PropertySuite>& suites_1000() {
  static const auto suites = [] {
    std::map<std::string, cli::PropertySuite> s;
    for (const auto& id : builtin_model_names()) s[id] = cli::run_property_suite(builtin_model(id), 1000, 1);
    return s;
  }();
  return suites;
}

Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Quat(n(rng), n(rng), n(rng), n(rng)).normalized();
}

/// Cubic in s = t / t_f about the hold posture, coefficients in [-amp, amp].
TrajectoryMatrix random_cubic(std::mt19937_64& rng, const RobotModel& m, double t_f, double amp) {
  std::uniform_real_distribution<double> u(-amp, amp);
  TrajectoryMatrix traj;
  traj.t_f = t_f;
  traj.gamma = MatX::Zero(m.num_joints(), 4);
  for (int j = 0; j < m.num_joints(); ++j) {
    if (m.joint_significance()[j] == Significance::Frozen) continue;
    traj.gamma.row(j) << u(rng) / (t_f * t_f * t_f), u(rng) / (t_f * t_f), u(rng) / t_f, 0.0;
  }
  return traj;
}

Verdict criterion1() {
  double worst = 0.0, seconds = 0.0;
  for (const auto& [id, s] : suites_1000()) {
    worst = std::max(worst, s.max_A_v);
    seconds = std::max(seconds, s.seconds);
  }
  return {worst < 1e-9 && seconds < 10.0,
          fmt("max |A_v| %.2e over 1000 states per model (< 1e-9), slowest model %.2f s (< 10 s)", worst, seconds)};
}

Verdict criterion2() {
  double worst = 0.0, smallest = std::numeric_limits<double>::infinity();
  for (const auto& [id, s] : suites_1000()) {
    worst = std::max(worst, s.max_identity_residual);
    smallest = std::min(smallest, s.min_singular_value);
  }
  return {worst < 1e-9 && smallest > 0.0,
          fmt("relative identity residual %.2e (< 1e-9), min singular value %.3e (> 0)", worst, smallest)};
}

Verdict criterion3() {
  double worst = 0.0;
  for (const char* id : {"planar3", "biped12", "humanoid20"}) {
    worst = std::max(worst, cli::run_property_suite(builtin_model(id), 500, 3).max_momentum_error);
  }
  return {worst < 1e-8, fmt("max relative momentum error %.2e over 500 states per model (< 1e-8)", worst)};
}

Verdict criterion4() {
  std::mt19937_64 rng(4);
  bool identical = true;
  double worst_drift = 0.0;
  for (const char* id : {"biped12", "humanoid20"}) {
    const auto m = builtin(id);
    for (int trial = 0; trial < 5; ++trial) {
      const TrajectoryMatrix traj = random_cubic(rng, *m, 0.3, 0.5);
      std::uniform_real_distribution<double> u(-2, 2);
      const FlightInitialState init = initial_state(random_quat(rng), Vec3(u(rng), u(rng), u(rng)), traj);
      const FlightOutcome plain = integrate_orientation(*m, init, traj, 200);
      IntegrationOptions pushed;
      pushed.base_velocity = [](double t) { return Vec3(1.0 + t, -2.0, 3.0 * t * t); };
      const FlightOutcome moved = integrate_orientation(*m, init, traj, 200, pushed);
      for (std::size_t i = 0; i < plain.log.samples.size(); ++i) {
        const auto& a = plain.log.samples[i];
        const auto& b = moved.log.samples[i];
        identical = identical && a.theta.coeffs() == b.theta.coeffs() && a.omega == b.omega;
      }
      const FlightOutcome fine = integrate_orientation(*m, init, traj, 10000);
      double drift = 0.0;
      for (const auto& s : fine.log.samples) drift = std::max(drift, (s.k_G - fine.k_Gf).norm());
      worst_drift = std::max(worst_drift, drift / (1.0 + fine.k_Gf.norm()));
    }
  }
  return {identical && worst_drift < 1e-6,
          fmt("base-velocity invariance %s, max drift / (1 + |k_Gf|) %.2e at 1e4 steps (< 1e-6)",
              identical ? "bit-identical" : "BROKEN", worst_drift)};
}

Verdict criterion5() {
  std::mt19937_64 rng(5);
  const auto m = builtin("biped12");
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const TrajectoryMatrix traj = random_cubic(rng, *m, 0.31, 0.3);
    const FlightInitialState init = initial_state(Quat::Identity(), Vec3::Zero(), traj);
    IntegrationOptions quiet;
    quiet.record_log = false;
    const double coarse = rotation_angle(integrate_orientation(*m, init, traj, 11, quiet).theta_tf);
    const double ref = rotation_angle(integrate_orientation(*m, init, traj, 10000, quiet).theta_tf);
    worst = std::max(worst, std::abs(coarse - ref));
  }
  return {worst < 1e-3,
          fmt("max |angle(N=11) - angle(N=1e4)| %.2e rad over 20 random cubics (< 1e-3); explicit Euler "
              "at 11 steps is first order",
              worst)};
}

Verdict criterion6() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  const auto random_matrix = [&](int r, int c) {
    MatX M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = n(rng);
    return M;
  };
  double worst_x = 0.0, worst_r = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 10, k = 3;
    const MatX M = random_matrix(p, p);
    const MatX Q = M * M.transpose() + MatX::Identity(p, p);
    const MatX A = random_matrix(k, p);
    const VecX b = random_matrix(k, 1);
    MatX K = MatX::Zero(p + k, p + k);
    K.topLeftCorner(p, p) = 2.0 * Q;
    K.topRightCorner(p, k) = A.transpose();
    K.bottomLeftCorner(k, p) = A;
    VecX rhs = VecX::Zero(p + k);
    rhs.tail(k) = b;
    const VecX kkt = K.fullPivLu().solve(rhs).head(p);

    nlp::ProblemFunctions f;
    f.cost = [Q](const VecX& x) { return x.dot(Q * x); };
    for (int i = 0; i < k; ++i)
      f.constraints.push_back([a = VecX(A.row(i).transpose()), bi = b[i]](const VecX& x) { return a.dot(x) - bi; });
    nlp::SolverOptions options;
    options.max_outer_iterations = 2000;
    options.cost_change_tol = 1e-14;
    options.gradient_tol = 1e-9;
    const nlp::SolveResult r = nlp::solve(f, VecX::Zero(p), options);
    worst_x = std::max(worst_x, (r.x_star - kkt).cwiseAbs().maxCoeff());
    worst_r = std::max(worst_r, r.constraint_residuals.cwiseAbs().maxCoeff());
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) monotone = monotone && r.cost_history[i] <= r.cost_history[i - 1];
  }
  return {worst_x < 1e-5 && worst_r < 1e-8 && monotone,
          fmt("50 quadratics: max |x - x_kkt| %.2e (< 1e-5), max residual %.2e (< 1e-8), cost %s", worst_x, worst_r,
              monotone ? "non-increasing" : "INCREASED")};
}

Verdict end_to_end(const std::string& config_name, int expected_dimension) {
  const RunConfig c = load_config(kConfigs + "/" + config_name);
  OptimizeOptions options;
  options.solver = c.solver;
  options.n_verify = c.n_verify;
  const FlightSolution s = optimize_flight(c.problem, options);
  const int dimension = FlightEvaluator(c.problem).layout().dimension();
  const double residual = s.solve.constraint_residuals.cwiseAbs().maxCoeff();
  const PlaybackReport& r = s.verification.report;
  const auto at = [&](const std::string& g) {
    return std::find(r.group_names.begin(), r.group_names.end(), g) - r.group_names.begin();
  };
  const std::size_t torso = at("torso");
  double leg_peak = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < r.group_names.size(); ++g) {
    if (r.group_names[g].find("leg") != std::string::npos) leg_peak = std::min(leg_peak, r.peak_sagittal[g]);
  }
  bool torso_below = true;
  for (const auto& sample : s.verification.log.samples) {
    torso_below = torso_below && std::abs(sample.group_momenta[torso].y()) < leg_peak;
  }
  const bool pass = s.solve.feasible && dimension == expected_dimension && residual < 1e-6 &&
                    r.touchdown_angle < 0.05 && torso_below;
  return {pass, fmt("p = %d, max residual %.2e (< 1e-6), touchdown angle %.4f rad at %d samples (< 0.05), "
                    "torso peak |k_y| %.3f below smaller leg peak %.3f",
                    dimension, residual, r.touchdown_angle, r.samples, r.peak_sagittal[torso], leg_peak)};
}

Verdict criterion7() { return end_to_end("biped12_run.json", 24); }
Verdict criterion8() { return end_to_end("humanoid20_run.json", 32); }

Verdict criterion9() {
  RunConfig c = load_config(kConfigs + "/biped12_run.json");
  c.problem.theta0 = Quat(Eigen::AngleAxisd(5.0 * M_PI / 180.0, Vec3::UnitY()));
  OptimizeOptions options;
  options.solver = c.solver;
  options.n_verify = c.n_verify;
  const FlightSolution s = optimize_flight(c.problem, options);
  const double frozen = frozen_limb_angle(c.problem, c.n_verify);
  const double angle = s.verification.report.touchdown_angle;
  return {s.solve.feasible && angle < frozen,
          fmt("5 deg liftoff pitch: optimized %.4f rad < frozen-limb %.4f rad", angle, frozen)};
}

Verdict criterion10() {
  const cli::BenchStats b = cli::bench(load_config(kConfigs + "/biped12_run.json"), 20);
  const cli::BenchStats h = cli::bench(load_config(kConfigs + "/humanoid20_run.json"), 20);
  return {b.median < 0.050 && h.median < 0.080,
          fmt("median over 20 solves: p = 24 %.1f ms (< 50), p = 32 %.1f ms (< 80)", b.median * 1e3,
              h.median * 1e3)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                          criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << argv[i] << "\n";
      return 2;
    }
    selected.push_back(k);
  }
  if (selected.empty())
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << "Criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
              << fmt("  [%.1f s]", seconds_since(t0)) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
