#include "flightopt/cli.hpp"

#include "flightopt/flight_dyn.hpp"
#include "flightopt/flight_opt.hpp"
#include "flightopt/model_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace flightopt::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json to_json(const VecX& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

double relative(double diff, double scale) { return diff / std::max(scale, 1e-12); }

}  // namespace

PropertySuite run_property_suite(const RobotModel& model, int configurations, unsigned long seed,
                                 const SuiteTolerances& tolerances) {
  if (configurations < 1) throw InputError("need at least one configuration");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> speed(-2.0, 2.0);

  PropertySuite suite;
  suite.configurations = configurations;
  suite.min_singular_value = std::numeric_limits<double>::infinity();
  const int n = model.num_joints();
  for (int s = 0; s < configurations; ++s) {
    Quat theta(normal(rng), normal(rng), normal(rng), normal(rng));
    theta.normalize();
    VecX q(n);
    for (int i = 0; i < n; ++i) q[i] = angle(rng);
    VecX nu(n + 6);
    for (int i = 0; i < n + 6; ++i) nu[i] = speed(rng);

    const Kinematics kin = forward_kinematics(model, theta, q);
    const CentroidalMap cmap = compute_centroidal_map(model, kin);
    const double a_v = cmap.A_v.cwiseAbs().maxCoeff();
    const OmegaIdentityCheck identity = verify_A_omega_identity(model, theta, q);

    const CentroidalState h = centroidal_momentum(cmap, nu);
    const BodyVelocities velocities = body_velocities(model, kin, nu);
    Vec3 l = Vec3::Zero();
    for (int b = 0; b < model.num_bodies(); ++b) {
      l += model.bodies()[b].inertia.mass * velocities.com_linear[b];
    }
    const Vec3 k = body_momenta(model, kin, nu).total_angular;
    Eigen::Matrix<double, 6, 1> brute;
    brute << l, k;
    Eigen::Matrix<double, 6, 1> mapped;
    mapped << h.l_G, h.k_G;
    const double momentum = relative((mapped - brute).norm(), brute.norm());

    const MatX A_G = cmap.A_G();
    const MatX A_G_mass = compute_centroidal_map(model, kin, CmmRoute::MassMatrix).A_G();
    const double route = relative((A_G - A_G_mass).norm(), A_G.norm());

    suite.max_A_v = std::max(suite.max_A_v, a_v);
    suite.max_identity_residual = std::max(suite.max_identity_residual, identity.residual);
    suite.min_singular_value = std::min(suite.min_singular_value, identity.min_singular_value);
    suite.max_momentum_error = std::max(suite.max_momentum_error, momentum);
    suite.max_route_difference = std::max(suite.max_route_difference, route);

    std::string failure;
    if (!(a_v < tolerances.A_v)) {
      failure = "A_v entry " + std::to_string(a_v) + " is not zero";
    } else if (!(identity.residual < tolerances.identity)) {
      failure = "A_omega identity residual " + std::to_string(identity.residual);
    } else if (!(identity.min_singular_value > 0.0)) {
      failure = "A_omega is singular";
    } else if (!(momentum <= tolerances.momentum)) {
      failure = "momentum oracle mismatch " + std::to_string(momentum);
    } else if (!(route <= tolerances.momentum)) {
      failure = "CMM routes disagree by " + std::to_string(route);
    }
    if (!failure.empty() && suite.passed) {
      suite.passed = false;
      suite.failure = "configuration " + std::to_string(s) + ": " + failure;
      suite.failing_orientation = theta;
      suite.failing_q = q;
      suite.failing_nu = nu;
    }
  }
  suite.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return suite;
}

std::string suite_to_json(const PropertySuite& suite, const RobotModel& model, unsigned long seed) {
  json j = {{"model", model.name()},
            {"seed", seed},
            {"configurations", suite.configurations},
            {"passed", suite.passed},
            {"max_A_v", suite.max_A_v},
            {"max_identity_residual", suite.max_identity_residual},
            {"min_singular_value", suite.min_singular_value},
            {"max_momentum_error", suite.max_momentum_error},
            {"max_route_difference", suite.max_route_difference},
            {"seconds", suite.seconds}};
  if (!suite.passed) {
    const Quat& t = suite.failing_orientation;
    j["failure"] = {{"message", suite.failure},
                    {"theta_quat", {t.w(), t.x(), t.y(), t.z()}},
                    {"q", to_json(suite.failing_q)},
                    {"nu", to_json(suite.failing_nu)}};
  }
  return j.dump(2) + "\n";
}

BenchStats bench(const RunConfig& config, int repeats) {
  if (repeats < 1) throw InputError("repeats must be at least 1");
  OptimizeOptions options;
  options.solver = config.solver;
  options.n_verify = 1;  // playback is not timed
  BenchStats stats;
  stats.repeats = repeats;
  for (int r = 0; r < repeats; ++r) {
    const FlightSolution solution = optimize_flight(config.problem, options);
    stats.samples.push_back(solution.solve.wall_time);
    stats.outer_iterations = solution.solve.outer_iterations;
    stats.cost_star = solution.solve.cost_star;
  }
  std::vector<double> sorted = stats.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  stats.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(m)));
  stats.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  stats.min = sorted.front();
  stats.max = sorted.back();
  return stats;
}

std::string machine_info() {
  std::string cpu = "unknown";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  std::ostringstream ss;
  ss << cpu << ", " << std::thread::hardware_concurrency() << " threads";
#ifdef __VERSION__
  ss << ", compiler " << __VERSION__;
#endif
#ifdef NDEBUG
  ss << ", optimized build";
#else
  ss << ", debug build";
#endif
  return ss.str();
}

namespace {

struct Flags {
  std::string config;
  std::string model;
  std::string out = ".";
  std::string gamma;
  unsigned long seed = 1;
  int repeats = 20;
  int configurations = 1000;
  std::optional<int> n_verify;
  bool literal_constraint_3 = false;
};

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw InputError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

RunConfig config_for(const Flags& f) {
  if (f.config.empty()) throw InputError("--config is required");
  RunConfig c = load_config(f.config, f.model.empty() ? std::nullopt : std::optional<std::string>(f.model));
  if (f.n_verify) {
    if (*f.n_verify < 1) throw InputError("--n-verify must be at least 1");
    c.n_verify = *f.n_verify;
  }
  if (f.literal_constraint_3) c.problem.literal_constraint_3 = true;
  c.problem.validate();
  return c;
}

int check_model(const Flags& f, std::ostream& out, std::ostream& err) {
  std::string spec = f.model;
  if (spec.empty() && !f.config.empty()) spec = load_config(f.config).model_spec;
  if (spec.empty()) throw InputError("--model or --config is required");
  const RobotModelPtr model = resolve_model(spec);
  const PropertySuite suite = run_property_suite(*model, f.configurations, f.seed);
  const std::string report = suite_to_json(suite, *model, f.seed);
  if (!f.out.empty() && f.out != ".") {
    prepare_out(f.out);
    write_text_file(in_dir(f.out, "check.json"), report);
  }
  out << std::setprecision(3);
  out << "model                 " << model->name() << " (" << model->num_joints() << " joints, "
      << model->num_bodies() << " bodies)\n"
      << "configurations        " << suite.configurations << " (seed " << f.seed << ")\n"
      << "max |A_v|             " << suite.max_A_v << "\n"
      << "A_omega identity      " << suite.max_identity_residual << "\n"
      << "min sigma(A_omega)    " << suite.min_singular_value << "\n"
      << "momentum oracle       " << suite.max_momentum_error << "\n"
      << "CMM route agreement   " << suite.max_route_difference << "\n"
      << "time                  " << suite.seconds << " s\n"
      << (suite.passed ? "PASS" : "FAIL") << "\n";
  if (!suite.passed) {
    err << "first failure: " << suite.failure << "\n" << report;
    return kNumerical;
  }
  return kOk;
}

int optimize(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig config = config_for(f);
  prepare_out(f.out);
  OptimizeOptions options;
  options.solver = config.solver;
  options.n_verify = config.n_verify;
  const FlightSolution solution = optimize_flight(config.problem, options);
  const RobotModel& model = *config.problem.model;

  write_text_file(in_dir(f.out, "result.json"), result_to_json(solution, config, f.seed));
  write_text_file(in_dir(f.out, "gamma.json"), gamma_to_json(solution.gamma, model));
  std::ostringstream csv;
  write_flight_csv(csv, solution.verification.log);
  write_text_file(in_dir(f.out, "flight.csv"), csv.str());
  std::ostringstream report;
  write_report(report, config, solution.verification.report, &solution.solve);
  write_text_file(in_dir(f.out, "report.txt"), report.str());
  out << report.str();

  const nlp::SolveResult& s = solution.solve;
  if (!s.feasible || s.termination_reason == nlp::TerminationReason::LineSearchStall ||
      s.termination_reason == nlp::TerminationReason::Infeasible) {
    err << "solve failed: " << nlp::to_string(s.termination_reason) << ", max residual "
        << s.constraint_residuals.cwiseAbs().maxCoeff() << "\n";
    for (int i = 0; i < kNumFlightConstraints; ++i) {
      err << "  " << constraint_names()[i] << " " << s.constraint_residuals[i] << "\n";
    }
    return kInfeasible;
  }
  return kOk;
}

int playback_command(const Flags& f, std::ostream& out) {
  const RunConfig config = config_for(f);
  if (f.gamma.empty()) throw InputError("--gamma is required");
  const TrajectoryMatrix traj = gamma_from_json(read_text_file(f.gamma), *config.problem.model);
  prepare_out(f.out);
  const Playback result = playback(config.problem, traj, config.n_verify);
  std::ostringstream csv;
  write_flight_csv(csv, result.log);
  write_text_file(in_dir(f.out, "flight.csv"), csv.str());
  std::ostringstream report;
  write_report(report, config, result.report, nullptr);
  write_text_file(in_dir(f.out, "report.txt"), report.str());
  out << report.str();
  return kOk;
}

int bench_command(const Flags& f, std::ostream& out) {
  const RunConfig config = config_for(f);
  const BenchStats stats = bench(config, f.repeats);
  const std::string machine = machine_info();
  const int p = make_layout(*config.problem.model, config.problem.degree, config.problem.t_f).dimension();
  out << std::setprecision(4);
  out << "model        " << config.problem.model->name() << " (p = " << p << ")\n"
      << "repeats      " << stats.repeats << "\n"
      << "median       " << stats.median * 1e3 << " ms\n"
      << "p95          " << stats.p95 * 1e3 << " ms\n"
      << "min / max    " << stats.min * 1e3 << " / " << stats.max * 1e3 << " ms\n"
      << "iterations   " << stats.outer_iterations << "\n"
      << "cost         " << stats.cost_star << " rad\n"
      << "machine      " << machine << "\n";
  if (!f.out.empty() && f.out != ".") {
    prepare_out(f.out);
    const json j = {{"model", config.problem.model->name()}, {"p", p},
                    {"repeats", stats.repeats},            {"median", stats.median},
                    {"p95", stats.p95},                    {"min", stats.min},
                    {"max", stats.max},                    {"outer_iterations", stats.outer_iterations},
                    {"cost_star", stats.cost_star},        {"samples", stats.samples},
                    {"machine", machine},                  {"seed", f.seed}};
    write_text_file(in_dir(f.out, "bench.json"), j.dump(2) + "\n");
  }
  return kOk;
}

int export_model(const Flags& f, std::ostream& out) {
  if (f.model.empty()) throw InputError("--model is required");
  const RobotModelPtr model = resolve_model(f.model);
  prepare_out(f.out);
  const ModelFiles files = serialize_model(*model);
  const std::string urdf = in_dir(f.out, model->name() + ".urdf");
  write_text_file(urdf, files.urdf);
  write_text_file(in_dir(f.out, model->name() + ".meta.json"), files.meta_json);
  out << "wrote " << urdf << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flight-phase limb swing optimization"};
  app.require_subcommand(1);
  Flags f;

  const auto add_model = [&](CLI::App* c) {
    c->add_option("--model", f.model, "builtin id (biped12, builtin:humanoid20) or URDF path");
  };
  const auto add_config = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--config", f.config, "run config JSON (a result.json also works)");
    if (required) o->required();
  };
  const auto add_out = [&](CLI::App* c) { c->add_option("--out", f.out, "output directory"); };
  const auto add_seed = [&](CLI::App* c) { c->add_option("--seed", f.seed, "seed, recorded in outputs"); };
  const auto add_problem = [&](CLI::App* c) {
    c->add_option("--n-verify", f.n_verify, "playback integration steps");
    c->add_flag("--literal-constraint-3", f.literal_constraint_3,
                "measure the liftoff swing foot from the touchdown CoM");
  };

  CLI::App* check = app.add_subcommand("check-model", "Property and momentum-oracle suites");
  add_model(check);
  add_config(check, false);
  add_out(check);
  add_seed(check);
  check->add_option("--configurations", f.configurations, "random states to test");

  CLI::App* opt = app.add_subcommand("optimize", "solve and write result.json, gamma.json, flight.csv, report.txt");
  add_config(opt, true);
  add_model(opt);
  add_out(opt);
  add_seed(opt);
  add_problem(opt);

  CLI::App* play = app.add_subcommand("playback", "re-integrate a saved trajectory");
  add_config(play, true);
  add_model(play);
  add_out(play);
  add_problem(play);
  play->add_option("--gamma", f.gamma, "gamma.json from optimize")->required();

  CLI::App* ben = app.add_subcommand("bench", "solver timing over repeated identical solves");
  add_config(ben, true);
  add_model(ben);
  add_out(ben);
  add_seed(ben);
  add_problem(ben);
  ben->add_option("--repeats", f.repeats, "number of solves");

  CLI::App* exp = app.add_subcommand("export-model", "write a model as URDF plus meta JSON");
  add_model(exp);
  add_out(exp);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (check->parsed()) return check_model(f, out, err);
    if (opt->parsed()) return optimize(f, out, err);
    if (play->parsed()) return playback_command(f, out);
    if (ben->parsed()) return bench_command(f, out);
    if (exp->parsed()) return export_model(f, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const nlp::SolverError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "internal failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kValidation;
}

}  // namespace flightopt::cli
