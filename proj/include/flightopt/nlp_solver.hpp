#pragma once

// Equality-constrained nonlinear optimizer built from numerical gradients and
// nullspace projections.
//
// Each outer iteration first restores feasibility one scalar constraint at a
// time: the gradient of constraint i is projected onto the nullspace of the
// gradients already collected in that pass and a line search walks to the
// constraint's zero crossing. The cost gradient is then projected onto the
// nullspace of all collected gradients and an Armijo line search takes the
// descent step. The loop repeats until a termination test fires.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace flightopt::nlp {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Function = std::function<double(const VecX&)>;

/// Cost plus scalar equality constraints c_i(x) = 0. Functions must be pure.
struct ProblemFunctions {
  Function cost;
  std::vector<Function> constraints;
};

struct SolverOptions {
  double gradient_step = 1e-6;      // central-difference step h
  double constraint_tol = 1e-8;     // eps_c
  double gradient_tol = 1e-6;       // eps_g, projected cost gradient norm
  double cost_change_tol = 1e-10;   // eps_f
  int max_outer_iterations = 100;
  int max_line_search_evaluations = 60;
  double bracket_expansion = 2.0;
  int max_restoration_passes = 30;
  // Take every constraint gradient of a restoration pass at the point where
  // the pass starts instead of after the preceding zero-crossing searches.
  // Constraints sharing expensive evaluations then share gradient probes.
  // The first pass from the starting point stays sequential.
  bool pass_start_gradients = false;
  // With pass_start_gradients, take the cost gradient at the start of the
  // last restoration pass too, where its probes coincide with the
  // constraint probes.
  bool shared_cost_gradient = false;

  void validate() const;  // throws std::invalid_argument
};

enum class TerminationReason { GradientTol, CostChangeTol, MaxIterations, LineSearchStall, Infeasible };

std::string_view to_string(TerminationReason reason);

struct SolveResult {
  VecX x_star;
  double cost_star = 0.0;
  VecX constraint_residuals;
  int outer_iterations = 0;
  long function_evaluations = 0;
  double wall_time = 0.0;  // seconds
  TerminationReason termination_reason = TerminationReason::MaxIterations;
  bool feasible = false;
  double projected_gradient_norm = 0.0;
  std::vector<double> cost_history;  // cost at each accepted feasible iterate
};

/// A problem function returned a non-finite value.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& message, int coordinate)
      : std::runtime_error(message), coordinate_(coordinate) {}
  int coordinate() const { return coordinate_; }  // -1 when not tied to one

 private:
  int coordinate_;
};

/// Central-difference gradient.
VecX numerical_gradient(const Function& f, const VecX& x, double h);

/// Orthonormal basis (p x (p - r)) of the nullspace of J^T, where J is p x k
/// and r its numerical rank (singular values above 1e-10 sigma_max).
MatX nullspace_basis(const MatX& J);

struct LineSearchResult {
  VecX x;
  double value = 0.0;
  double alpha = 0.0;
  int evaluations = 0;
  bool converged = false;  // false: stall
};

/// Finds alpha with |f(x + alpha d)| <= constraint_tol. Secant steps while no
/// sign change is known, Illinois regula falsi once the root is bracketed.
/// On stall returns the point with the smallest |f| seen.
LineSearchResult line_search_zero(const Function& f, const VecX& x, const VecX& d,
                                  const SolverOptions& options, double alpha0 = 1.0,
                                  std::optional<double> f0 = std::nullopt);

/// Armijo line search (c1 = 1e-4). An accepted initial step is expanded while
/// the cost keeps dropping and polished with one parabolic fit; a rejected one
/// is backtracked with safeguarded quadratic interpolation. Never returns a
/// point worse than x. `slope` is the directional derivative at x; it is
/// estimated by finite differences when omitted.
LineSearchResult line_search_min(const Function& f, const VecX& x, const VecX& d,
                                 const SolverOptions& options, double alpha0 = 1.0,
                                 std::optional<double> f0 = std::nullopt,
                                 std::optional<double> slope = std::nullopt,
                                 double max_alpha = std::numeric_limits<double>::infinity());

SolveResult solve(const ProblemFunctions& functions, const VecX& x0, const SolverOptions& options = {});

}  // namespace flightopt::nlp
