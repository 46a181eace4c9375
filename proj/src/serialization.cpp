#include "flightopt/io.hpp"

#include "flightopt/model_io.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace flightopt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::set<std::string> kConfigKeys = {
    "model",   "t_f",    "theta0_quat", "omega0",      "v_com_liftoff", "p_stance_td_target",
    "p_swing_lo_target", "h_stance",    "h_swing",     "N",             "degree",
    "solver",  "q_hold", "stance_foot", "literal_constraint_3",          "normalized_time",
    "n_verify"};

const std::set<std::string> kSolverKeys = {
    "gradient_step",  "constraint_tol", "gradient_tol",
    "cost_change_tol", "max_outer_iterations", "max_line_search_evaluations",
    "bracket_expansion", "max_restoration_passes", "pass_start_gradients",
    "shared_cost_gradient"};

[[noreturn]] void fail(const std::string& message) { throw InputError("config: " + message); }

double number(const json& j, const std::string& key) {
  if (!j.contains(key)) fail("missing '" + key + "'");
  if (!j[key].is_number()) fail("'" + key + "' must be a number");
  return j[key].get<double>();
}

int integer(const json& j, const std::string& key) {
  if (!j[key].is_number_integer()) fail("'" + key + "' must be an integer");
  return j[key].get<int>();
}

Vec3 vec3(const json& j, const std::string& key) {
  if (!j.contains(key)) fail("missing '" + key + "'");
  const json& v = j[key];
  if (!v.is_array() || v.size() != 3) fail("'" + key + "' must be an array of 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) fail("'" + key + "' must be an array of 3 numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const VecX& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) fail("unknown key '" + item.key() + "'" + where);
  }
}

nlp::SolverOptions parse_solver(const json& j) {
  nlp::SolverOptions s;
  if (!j.is_object()) fail("'solver' must be an object");
  reject_unknown(j, kSolverKeys, " in 'solver'");
  if (j.contains("gradient_step")) s.gradient_step = number(j, "gradient_step");
  if (j.contains("constraint_tol")) s.constraint_tol = number(j, "constraint_tol");
  if (j.contains("gradient_tol")) s.gradient_tol = number(j, "gradient_tol");
  if (j.contains("cost_change_tol")) s.cost_change_tol = number(j, "cost_change_tol");
  if (j.contains("max_outer_iterations")) s.max_outer_iterations = integer(j, "max_outer_iterations");
  if (j.contains("max_line_search_evaluations")) {
    s.max_line_search_evaluations = integer(j, "max_line_search_evaluations");
  }
  if (j.contains("bracket_expansion")) s.bracket_expansion = number(j, "bracket_expansion");
  if (j.contains("max_restoration_passes")) s.max_restoration_passes = integer(j, "max_restoration_passes");
  for (const char* key : {"pass_start_gradients", "shared_cost_gradient"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_boolean()) fail(std::string("'") + key + "' must be a boolean");
    (std::string(key) == "pass_start_gradients" ? s.pass_start_gradients : s.shared_cost_gradient) =
        j[key].get<bool>();
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("solver: ") + e.what());
  }
  return s;
}

json solver_to_json(const nlp::SolverOptions& s) {
  return {{"gradient_step", s.gradient_step},
          {"constraint_tol", s.constraint_tol},
          {"gradient_tol", s.gradient_tol},
          {"cost_change_tol", s.cost_change_tol},
          {"max_outer_iterations", s.max_outer_iterations},
          {"max_line_search_evaluations", s.max_line_search_evaluations},
          {"bracket_expansion", s.bracket_expansion},
          {"max_restoration_passes", s.max_restoration_passes},
          {"pass_start_gradients", s.pass_start_gradients},
          {"shared_cost_gradient", s.shared_cost_gradient}};
}

json config_json(const RunConfig& c) {
  const FlightProblem& p = c.problem;
  json q_hold = json::object();
  const VecX holds = p.holds();
  for (int i = 0; i < holds.size(); ++i) q_hold[p.model->joint_names()[i]] = holds[i];
  return {{"model", c.model_spec},
          {"t_f", p.t_f},
          {"theta0_quat", json::array({p.theta0.w(), p.theta0.x(), p.theta0.y(), p.theta0.z()})},
          {"omega0", to_json(p.omega0)},
          {"v_com_liftoff", to_json(p.v_com_liftoff)},
          {"p_stance_td_target", to_json(p.p_stance_td_target)},
          {"p_swing_lo_target", to_json(p.p_swing_lo_target)},
          {"h_stance", p.h_stance},
          {"h_swing", p.h_swing},
          {"N", p.N},
          {"degree", p.degree},
          {"stance_foot", p.stance_left ? "left" : "right"},
          {"q_hold", q_hold},
          {"literal_constraint_3", p.literal_constraint_3},
          {"normalized_time", p.normalized_time},
          {"n_verify", c.n_verify},
          {"solver", solver_to_json(c.solver)}};
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": malformed JSON: " + e.what());
  }
}

RunConfig config_from(const json& j, const std::string& base_dir, const std::optional<std::string>& model_override) {
  if (!j.is_object()) fail("top level must be an object");
  reject_unknown(j, kConfigKeys, "");
  RunConfig c;
  if (model_override) {
    c.model_spec = *model_override;
  } else {
    if (!j.contains("model") || !j["model"].is_string()) fail("missing 'model'");
    c.model_spec = j["model"].get<std::string>();
  }
  std::string resolved = c.model_spec;
  if (!model_override && resolved.rfind("builtin:", 0) != 0 && fs::path(resolved).is_relative() &&
      fs::exists(fs::path(base_dir) / resolved)) {
    resolved = (fs::path(base_dir) / resolved).string();
  }
  FlightProblem& p = c.problem;
  p.model = resolve_model(resolved);

  p.t_f = number(j, "t_f");
  if (j.contains("theta0_quat")) {
    const json& q = j["theta0_quat"];
    if (!q.is_array() || q.size() != 4 || !std::all_of(q.begin(), q.end(), [](const json& v) { return v.is_number(); })) {
      fail("'theta0_quat' must be [w, x, y, z]");
    }
    p.theta0 = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  }
  if (j.contains("omega0")) p.omega0 = vec3(j, "omega0");
  p.v_com_liftoff = vec3(j, "v_com_liftoff");
  p.p_stance_td_target = vec3(j, "p_stance_td_target");
  p.p_swing_lo_target = vec3(j, "p_swing_lo_target");
  p.h_stance = number(j, "h_stance");
  p.h_swing = number(j, "h_swing");
  if (j.contains("N")) p.N = integer(j, "N");
  if (j.contains("degree")) p.degree = integer(j, "degree");
  if (j.contains("stance_foot")) {
    const json& s = j["stance_foot"];
    if (s != "left" && s != "right") fail("'stance_foot' must be \"left\" or \"right\"");
    p.stance_left = s == "left";
  }
  if (j.contains("literal_constraint_3")) {
    if (!j["literal_constraint_3"].is_boolean()) fail("'literal_constraint_3' must be a boolean");
    p.literal_constraint_3 = j["literal_constraint_3"].get<bool>();
  }
  if (j.contains("normalized_time")) {
    if (!j["normalized_time"].is_boolean()) fail("'normalized_time' must be a boolean");
    p.normalized_time = j["normalized_time"].get<bool>();
  }
  if (j.contains("q_hold")) {
    const json& h = j["q_hold"];
    if (!h.is_object()) fail("'q_hold' must be an object of joint name to angle");
    p.q_hold = VecX::Zero(p.model->num_joints());
    for (const auto& item : h.items()) {
      if (!item.value().is_number()) fail("q_hold '" + item.key() + "' must be a number");
      p.q_hold[p.model->joint_index(item.key())] = item.value().get<double>();
    }
  }
  if (j.contains("n_verify")) c.n_verify = integer(j, "n_verify");
  if (c.n_verify < 2) fail("'n_verify' must be at least 2");
  if (j.contains("solver")) c.solver = parse_solver(j["solver"]);
  p.validate();
  return c;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

RunConfig parse_config(const std::string& json_text, const std::string& base_dir,
                       const std::optional<std::string>& model_override) {
  return config_from(parse_json(json_text, "config"), base_dir, model_override);
}

RunConfig load_config(const std::string& path, const std::optional<std::string>& model_override) {
  json j = parse_json(read_text_file(path), path);
  if (j.is_object() && j.contains("config") && j.contains("solve")) j = j["config"];
  const std::string base = fs::path(path).parent_path().string();
  return config_from(j, base.empty() ? "." : base, model_override);
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string gamma_to_json(const TrajectoryMatrix& traj, const RobotModel& model) {
  json rows = json::array();
  for (int i = 0; i < traj.num_joints(); ++i) rows.push_back(to_json(VecX(traj.gamma.row(i).transpose())));
  json j = {{"degree", traj.degree()}, {"t_f", traj.t_f}, {"joint_names", model.joint_names()}, {"gamma", rows}};
  return j.dump(2) + "\n";
}

TrajectoryMatrix gamma_from_json(const std::string& json_text, const RobotModel& model) {
  const json j = parse_json(json_text, "gamma");
  const auto bad = [](const std::string& m) { throw InputError("gamma: " + m); };
  if (!j.is_object() || !j.contains("degree") || !j.contains("t_f") || !j.contains("joint_names") ||
      !j.contains("gamma")) {
    bad("expected keys degree, t_f, joint_names, gamma");
  }
  if (!j["degree"].is_number_integer() || j["degree"].get<int>() < 0) bad("degree must be a non-negative integer");
  if (!j["t_f"].is_number() || !(j["t_f"].get<double>() > 0.0)) bad("t_f must be positive");
  const int degree = j["degree"].get<int>();
  const json& names = j["joint_names"];
  const json& rows = j["gamma"];
  if (!names.is_array() || !rows.is_array() || names.size() != rows.size()) {
    bad("joint_names and gamma must be arrays of equal length");
  }
  if (static_cast<int>(names.size()) != model.num_joints()) {
    bad("has " + std::to_string(names.size()) + " joints, model has " + std::to_string(model.num_joints()));
  }
  TrajectoryMatrix traj;
  traj.t_f = j["t_f"].get<double>();
  traj.gamma = MatX::Zero(model.num_joints(), degree + 1);
  std::vector<bool> seen(model.num_joints(), false);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!names[r].is_string()) bad("joint names must be strings");
    const int joint = model.joint_index(names[r].get<std::string>());
    if (seen[joint]) bad("duplicate joint '" + names[r].get<std::string>() + "'");
    seen[joint] = true;
    if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != degree + 1) {
      bad("row for '" + names[r].get<std::string>() + "' must have degree + 1 coefficients");
    }
    for (int c = 0; c <= degree; ++c) {
      if (!rows[r][c].is_number()) bad("coefficients must be numbers");
      traj.gamma(joint, c) = rows[r][c].get<double>();
    }
  }
  return traj;
}

std::string result_to_json(const FlightSolution& solution, const RunConfig& config, unsigned long seed) {
  const nlp::SolveResult& s = solution.solve;
  const PlaybackReport& r = solution.verification.report;
  json residuals = json::object();
  for (int i = 0; i < kNumFlightConstraints; ++i) residuals[constraint_names()[i]] = s.constraint_residuals[i];
  json verify_residuals = json::object();
  for (int i = 0; i < kNumFlightConstraints; ++i) verify_residuals[constraint_names()[i]] = r.residuals[i];
  json groups = json::object();
  for (std::size_t g = 0; g < r.group_names.size(); ++g) {
    groups[r.group_names[g]] = {{"peak_sagittal", r.peak_sagittal[g]}, {"peak", to_json(r.peak_momentum[g])}};
  }
  json rows = json::array();
  for (int i = 0; i < solution.gamma.num_joints(); ++i) {
    rows.push_back(to_json(VecX(solution.gamma.gamma.row(i).transpose())));
  }
  json j = {
      {"seed", seed},
      {"config", config_json(config)},
      {"solve",
       {{"x_star", to_json(s.x_star)},
        {"cost_star", s.cost_star},
        {"constraint_residuals", residuals},
        {"outer_iterations", s.outer_iterations},
        {"function_evaluations", s.function_evaluations},
        {"integrations", solution.integrations},
        {"wall_time", s.wall_time},
        {"termination_reason", std::string(nlp::to_string(s.termination_reason))},
        {"feasible", s.feasible},
        {"projected_gradient_norm", s.projected_gradient_norm},
        {"cost_history", s.cost_history}}},
      {"gamma", {{"degree", solution.gamma.degree()}, {"t_f", solution.gamma.t_f},
                 {"joint_names", config.problem.model->joint_names()}, {"gamma", rows}}},
      {"verification",
       {{"samples", r.samples},
        {"touchdown_angle", r.touchdown_angle},
        {"touchdown_rpy", to_json(r.touchdown_rpy)},
        {"omega_tf", to_json(r.omega_tf)},
        {"constraint_residuals", verify_residuals},
        {"stance_target_error", r.stance_target_error},
        {"swing_target_error", r.swing_target_error},
        {"momentum_drift", r.momentum_drift},
        {"k_Gf", to_json(r.k_Gf)},
        {"groups", groups}}}};
  return j.dump(2) + "\n";
}

void write_report(std::ostream& out, const RunConfig& config, const PlaybackReport& report,
                  const nlp::SolveResult* solve) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  const FlightProblem& p = config.problem;
  out << "model            " << p.model->name() << " (" << p.model->num_joints() << " joints, "
      << make_layout(*p.model, p.degree, p.t_f).dimension() << " free coefficients)\n";
  out << "flight time      " << p.t_f << " s, N = " << p.N << ", playback samples = " << report.samples << "\n";
  if (solve) {
    out << std::setprecision(6);
    out << "termination      " << nlp::to_string(solve->termination_reason)
        << (solve->feasible ? "" : " (INFEASIBLE)") << "\n";
    out << "iterations       " << solve->outer_iterations << "\n";
    out << "evaluations      " << solve->function_evaluations << "\n";
    out << "wall time        " << solve->wall_time * 1e3 << " ms\n";
    out << "cost (N)         " << solve->cost_star << " rad\n";
    out << "max residual (N) " << solve->constraint_residuals.cwiseAbs().maxCoeff() << "\n";
  }
  out << std::setprecision(6);
  out << "touchdown angle  " << report.touchdown_angle << " rad ("
      << report.touchdown_angle * 180.0 / M_PI << " deg)\n";
  out << "touchdown rpy    " << report.touchdown_rpy.transpose() << " rad\n";
  out << "omega(t_f)       " << report.omega_tf.transpose() << " rad/s\n";
  out << "stance target    " << report.stance_target_error << " m\n";
  out << "swing target     " << report.swing_target_error << " m\n";
  out << "momentum drift   " << report.momentum_drift << "\n";
  out << "k_Gf             " << report.k_Gf.transpose() << "\n";
  out << "residuals at playback resolution:\n";
  for (int i = 0; i < kNumFlightConstraints; ++i) {
    out << "  " << std::left << std::setw(22) << constraint_names()[i] << std::right << report.residuals[i] << "\n";
  }
  out << "peak |k_y| per group:\n";
  for (std::size_t g = 0; g < report.group_names.size(); ++g) {
    out << "  " << std::left << std::setw(22) << report.group_names[g] << std::right << report.peak_sagittal[g]
        << "\n";
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace flightopt
