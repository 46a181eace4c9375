#include "flightopt/nlp_solver.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace flightopt::nlp {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxRejections = 4;

double checked(const Function& f, const VecX& x, int coordinate = -1) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw SolverError(coordinate >= 0 ? "non-finite function value at coordinate " + std::to_string(coordinate)
                                      : std::string("non-finite function value"),
                      coordinate);
  }
  return v;
}

bool same_sign(double a, double b) { return (a > 0.0) == (b > 0.0); }

}  // namespace

void SolverOptions::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(gradient_step, "gradient_step");
  positive(constraint_tol, "constraint_tol");
  positive(gradient_tol, "gradient_tol");
  positive(cost_change_tol, "cost_change_tol");
  if (max_outer_iterations < 1) throw std::invalid_argument("max_outer_iterations must be at least 1");
  if (max_line_search_evaluations < 2) throw std::invalid_argument("max_line_search_evaluations must be at least 2");
  if (!(bracket_expansion > 1.0)) throw std::invalid_argument("bracket_expansion must exceed 1");
  if (max_restoration_passes < 1) throw std::invalid_argument("max_restoration_passes must be at least 1");
}

std::string_view to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::GradientTol: return "gradient_tol";
    case TerminationReason::CostChangeTol: return "cost_change_tol";
    case TerminationReason::MaxIterations: return "max_iters";
    case TerminationReason::LineSearchStall: return "line_search_stall";
    case TerminationReason::Infeasible: return "infeasible";
  }
  return "unknown";
}

VecX numerical_gradient(const Function& f, const VecX& x, double h) {
  VecX g(x.size());
  VecX probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i] - h;
    const double fm = checked(f, probe, static_cast<int>(i));
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

MatX nullspace_basis(const MatX& J) {
  const Eigen::Index p = J.rows();
  if (J.cols() == 0) return MatX::Identity(p, p);
  const Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeFullU);
  const VecX& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > 1e-10 * smax) ++rank;
    }
  }
  return svd.matrixU().rightCols(p - rank);
}

namespace {

// g minus its component in the numerical range of J; equals B B^T g for the
// nullspace basis B.
VecX project_out(const MatX& J, const VecX& g) {
  if (J.cols() == 0) return g;
  const Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeThinU);
  const VecX& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index rank = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] > 1e-10 * smax) ++rank;
    }
  }
  const auto U = svd.matrixU().leftCols(rank);
  return g - U * (U.transpose() * g);
}

// Orthonormal basis of the gradients collected so far in a pass, grown one
// column at a time. Columns whose remainder falls below the rank threshold
// add nothing.
class GrowingBasis {
 public:
  GrowingBasis(Eigen::Index p, Eigen::Index k) : q_(p, k) {}

  /// g minus its component in the span so far; appends the remainder.
  VecX add(const VecX& g) {
    scale_ = std::max(scale_, g.norm());
    VecX w = g;
    for (int sweep = 0; sweep < 2; ++sweep) {
      const auto Q = q_.leftCols(rank_);
      w -= Q * (Q.transpose() * w);
    }
    const double n = w.norm();
    if (!(n > 1e-10 * scale_)) return VecX::Zero(g.size());
    q_.col(rank_++) = w / n;
    return w;
  }

 private:
  MatX q_;
  Eigen::Index rank_ = 0;
  double scale_ = 0.0;
};

}  // namespace

LineSearchResult line_search_zero(const Function& f, const VecX& x, const VecX& d,
                                  const SolverOptions& options, double alpha0, std::optional<double> f0) {
  const double tol = options.constraint_tol;
  LineSearchResult best;
  const auto phi = [&](double alpha) {
    ++best.evaluations;
    return checked(f, x + alpha * d);
  };

  double a = 0.0;
  double fa = f0 ? *f0 : phi(0.0);
  best.x = x;
  best.value = fa;
  best.alpha = 0.0;
  const auto consider = [&](double alpha, double value) {
    if (std::abs(value) < std::abs(best.value)) {
      best.alpha = alpha;
      best.value = value;
    }
  };
  const auto finish = [&](bool converged) {
    best.x = x + best.alpha * d;
    best.converged = converged;
    return best;
  };
  if (std::abs(fa) <= tol) return finish(true);

  double b = std::isfinite(alpha0) && alpha0 != 0.0 ? alpha0 : 1.0;
  double fb = phi(b);
  consider(b, fb);
  bool bracketed = !same_sign(fa, fb);

  while (best.evaluations < options.max_line_search_evaluations) {
    if (std::abs(fb) <= tol) return finish(true);
    if (b == a || std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(b))) break;
    double c;
    if (bracketed) {
      c = b - fb * (b - a) / (fb - fa);
      if (!(c > std::min(a, b) && c < std::max(a, b))) c = 0.5 * (a + b);
    } else {
      const double reach = options.bracket_expansion * std::abs(b - a);
      if (fb == fa) {
        c = b + options.bracket_expansion * (b - a);
      } else {
        c = b - fb * (b - a) / (fb - fa);
        c = std::clamp(c, b - reach, b + reach);
      }
    }
    const double fc = phi(c);
    consider(c, fc);
    if (std::abs(fc) <= tol) return finish(true);
    if (bracketed) {
      if (!same_sign(fc, fb)) {
        a = b;
        fa = fb;
      } else {
        fa *= 0.5;
      }
    } else {
      if (!same_sign(fc, fb)) {
        bracketed = true;
        a = b;
        fa = fb;
      } else if (std::abs(fc) > std::abs(fb)) {
        // moved the wrong way: keep the better point as the newest
        a = c;
        fa = fc;
        continue;
      } else {
        a = b;
        fa = fb;
      }
    }
    b = c;
    fb = fc;
  }
  return finish(std::abs(best.value) <= tol);
}

LineSearchResult line_search_min(const Function& f, const VecX& x, const VecX& d,
                                 const SolverOptions& options, double alpha0, std::optional<double> f0,
                                 std::optional<double> slope, double max_alpha) {
  LineSearchResult out;
  const auto phi = [&](double alpha) {
    ++out.evaluations;
    return checked(f, x + alpha * d);
  };
  const double phi0 = f0 ? *f0 : phi(0.0);
  out.x = x;
  out.value = phi0;
  out.alpha = 0.0;

  const double dnorm = d.norm();
  if (!(dnorm > 0.0)) return out;
  double s;
  if (slope) {
    s = *slope;
  } else {
    const double h = options.gradient_step / dnorm;
    s = (phi(h) - phi(-h)) / (2.0 * h);
  }
  if (!(s < 0.0)) return out;

  const auto armijo = [&](double alpha, double value) { return value <= phi0 + kArmijo * alpha * s; };
  const int budget = options.max_line_search_evaluations;

  double alpha = std::min(std::isfinite(alpha0) && alpha0 > 0.0 ? alpha0 : 1.0, max_alpha);
  double value = phi(alpha);

  if (armijo(alpha, value)) {
    double prev_alpha = 0.0;
    double prev_value = phi0;
    double next_alpha = alpha;
    double next_value = value;
    bool bracketed = false;
    while (out.evaluations < budget) {
      const double trial = alpha * options.bracket_expansion;
      if (trial > max_alpha) break;
      const double tv = phi(trial);
      next_alpha = trial;
      next_value = tv;
      if (armijo(trial, tv) && tv < value) {
        prev_alpha = alpha;
        prev_value = value;
        alpha = trial;
        value = tv;
      } else {
        bracketed = true;
        break;
      }
    }
    if (bracketed && out.evaluations < budget) {
      // parabola through (prev, alpha, next)
      const double x1 = prev_alpha, x2 = alpha, x3 = next_alpha;
      const double y1 = prev_value, y2 = value, y3 = next_value;
      const double denom = (x1 - x2) * (x1 - x3) * (x2 - x3);
      if (denom != 0.0) {
        const double A = (x3 * (y2 - y1) + x2 * (y1 - y3) + x1 * (y3 - y2)) / denom;
        const double B = (x3 * x3 * (y1 - y2) + x2 * x2 * (y3 - y1) + x1 * x1 * (y2 - y3)) / denom;
        if (A > 0.0) {
          const double vertex = -B / (2.0 * A);
          if (vertex > x1 && vertex < x3 && vertex != x2) {
            const double vv = phi(vertex);
            if (armijo(vertex, vv) && vv < value) {
              alpha = vertex;
              value = vv;
            }
          }
        }
      }
    }
    out.alpha = alpha;
    out.value = value;
    out.x = x + alpha * d;
    out.converged = true;
    return out;
  }

  while (out.evaluations < budget) {
    const double denom = 2.0 * (value - phi0 - s * alpha);
    double next = denom > 0.0 ? -s * alpha * alpha / denom : 0.5 * alpha;
    next = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
    alpha = next;
    value = phi(alpha);
    if (armijo(alpha, value)) {
      out.alpha = alpha;
      out.value = value;
      out.x = x + alpha * d;
      out.converged = true;
      return out;
    }
    if (alpha < 1e-16) break;
  }
  return out;
}

SolveResult solve(const ProblemFunctions& functions, const VecX& x0, const SolverOptions& options) {
  options.validate();
  if (!functions.cost) throw std::invalid_argument("cost function is required");
  for (const auto& c : functions.constraints) {
    if (!c) throw std::invalid_argument("constraint function is empty");
  }
  if (x0.size() == 0) throw std::invalid_argument("starting point is empty");
  if (!x0.allFinite()) throw std::invalid_argument("starting point is not finite");

  const auto start = std::chrono::steady_clock::now();
  long evaluations = 0;
  const Function cost = [&](const VecX& x) {
    ++evaluations;
    return functions.cost(x);
  };
  std::vector<Function> constraints;
  constraints.reserve(functions.constraints.size());
  for (const auto& c : functions.constraints) {
    constraints.push_back([&evaluations, &c](const VecX& x) {
      ++evaluations;
      return c(x);
    });
  }
  const Eigen::Index p = x0.size();
  const int nc = static_cast<int>(constraints.size());
  const double tol = options.constraint_tol;
  const double h = options.gradient_step;

  const auto residuals = [&](const VecX& x) {
    VecX r(nc);
    for (int i = 0; i < nc; ++i) r[i] = checked(constraints[i], x, -1);
    return r;
  };
  const auto max_abs = [](const VecX& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; };

  struct Restored {
    VecX x;
    MatX J;
    VecX r;
    VecX linearized_at;  // start of the last lagged pass
    bool feasible = false;
  };
  // Before any feasible iterate exists the first pass runs sequentially;
  // lagged gradients from a far-off start diverge.
  const auto restore = [&](VecX x, bool started) {
    Restored out;
    out.J.resize(p, nc);
    if (nc == 0) {
      out.x = std::move(x);
      out.r.resize(0);
      out.feasible = true;
      return out;
    }
    double best = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int pass = 0; pass < options.max_restoration_passes; ++pass) {
      const VecX pass_start = x;
      const bool lagged = options.pass_start_gradients && (started || pass > 0);
      if (lagged) out.linearized_at = pass_start;
      GrowingBasis basis(p, nc);
      for (int i = 0; i < nc; ++i) {
        const VecX g = numerical_gradient(constraints[i], lagged ? pass_start : x, h);
        const VecX dir = basis.add(g);
        out.J.col(i) = g;
        const double fi = checked(constraints[i], x);
        if (std::abs(fi) <= tol) continue;
        const double curvature = g.dot(dir);
        if (!(dir.norm() > 1e-14 * (1.0 + g.norm())) || !(std::abs(curvature) > 0.0)) continue;
        const LineSearchResult ls = line_search_zero(constraints[i], x, dir, options, -fi / curvature, fi);
        x = ls.x;
      }
      out.r = residuals(x);
      const double worst = max_abs(out.r);
      if (worst <= tol) {
        out.feasible = true;
        break;
      }
      if (worst < 0.5 * best) {
        stagnant = 0;
      } else if (++stagnant >= 3) {
        break;
      }
      best = std::min(best, worst);
    }
    out.x = std::move(x);
    return out;
  };

  SolveResult result;
  const auto finish = [&](SolveResult& r, const VecX& x, double c, TerminationReason reason) {
    r.x_star = x;
    r.cost_star = c;
    r.constraint_residuals = residuals(x);
    r.feasible = max_abs(r.constraint_residuals) <= tol;
    r.termination_reason = reason;
    r.function_evaluations = evaluations;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };

  VecX x = x0;
  bool have_prev = false;
  VecX x_prev;
  double prev_cost = 0.0;
  VecX d_prev;
  double slope_prev = 0.0;
  double last_alpha = 1.0;
  double next_alpha = 1.0;
  int rejections = 0;

  for (int iter = 1; iter <= options.max_outer_iterations; ++iter) {
    result.outer_iterations = iter;
    Restored A = restore(x, have_prev);
    const double c = A.feasible ? checked(cost, A.x) : std::numeric_limits<double>::infinity();

    if (have_prev && (!A.feasible || c > prev_cost)) {
      if (++rejections > kMaxRejections) {
        return finish(result, x_prev, prev_cost, TerminationReason::LineSearchStall);
      }
      const double cap = 0.25 * last_alpha;
      const LineSearchResult ls = line_search_min(cost, x_prev, d_prev, options, cap, prev_cost, slope_prev, cap);
      if (!ls.converged) return finish(result, x_prev, prev_cost, TerminationReason::LineSearchStall);
      last_alpha = ls.alpha;
      x = ls.x;
      continue;
    }
    if (!A.feasible) {
      result.constraint_residuals = A.r;
      return finish(result, A.x, checked(cost, A.x), TerminationReason::Infeasible);
    }

    rejections = 0;
    result.cost_history.push_back(c);
    const bool small_change = have_prev && std::abs(prev_cost - c) < options.cost_change_tol;
    have_prev = true;
    prev_cost = c;
    x_prev = A.x;
    if (small_change) return finish(result, x_prev, prev_cost, TerminationReason::CostChangeTol);

    const bool shared = options.shared_cost_gradient && A.linearized_at.size() == p;
    const VecX g = numerical_gradient(cost, shared ? A.linearized_at : x_prev, h);
    const VecX pg = project_out(A.J, g);
    result.projected_gradient_norm = pg.norm();
    if (pg.norm() < options.gradient_tol) {
      return finish(result, x_prev, prev_cost, TerminationReason::GradientTol);
    }
    d_prev = -pg;
    slope_prev = -pg.squaredNorm();
    const LineSearchResult ls = line_search_min(cost, x_prev, d_prev, options, next_alpha, prev_cost, slope_prev);
    if (!ls.converged) return finish(result, x_prev, prev_cost, TerminationReason::LineSearchStall);
    last_alpha = ls.alpha;
    next_alpha = ls.alpha;
    x = ls.x;
  }

  // The last step has not been restored yet; keep it only if it is an improvement.
  Restored A = restore(x, have_prev);
  if (A.feasible) {
    const double c = checked(cost, A.x);
    if (!have_prev || c <= prev_cost) {
      result.cost_history.push_back(c);
      return finish(result, A.x, c, TerminationReason::MaxIterations);
    }
  }
  if (!have_prev) return finish(result, A.x, checked(cost, A.x), TerminationReason::Infeasible);
  return finish(result, x_prev, prev_cost, TerminationReason::MaxIterations);
}

}  // namespace flightopt::nlp
