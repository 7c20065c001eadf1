#pragma once

#include <functional>
#include <string_view>
#include <vector>

namespace crcvote::optim {

using Vector = std::vector<double>;

/// Returns the loss at `x` and writes the gradient into `grad`, which the
/// caller sizes to x.size().
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int memory = 10;
  double grad_tolerance = 1e-6;  // infinity norm
  int max_iterations = 200;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search_evaluations = 40;
  /// After a strong-Wolfe step is found, also try the secant step that zeroes
  /// the interpolated slope and keep it when it is a better Wolfe point.
  /// Exact on quadratics, which gives finite termination there.
  bool refine_step = true;

  /// Throws Error(usage) unless memory >= 1, 0 < c1 < c2 < 1, grad_tolerance > 0.
  void validate() const;
};

enum class Termination { gradient_tolerance, max_iterations, line_search_failure };

std::string_view to_string(Termination t);

struct Solution {
  Vector parameters;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
  /// Loss at x0 followed by the loss after every accepted step.
  std::vector<double> loss_history;
};

/// Limited-memory BFGS with strong-Wolfe line search.
///
/// Throws Error(numeric) with the iteration index when the objective returns a
/// non-finite loss or gradient at an accepted point. A failed line search ends
/// the run with Termination::line_search_failure and the best iterate so far.
Solution lbfgs_minimize(const Objective& f, Vector x0, const LbfgsOptions& opts = {});

enum class LineSearchStatus { success, bracketing_exhausted };

struct LineSearchResult {
  LineSearchStatus status = LineSearchStatus::success;
  double step = 0.0;
  double loss = 0.0;
  Vector x;
  Vector gradient;
  int evaluations = 0;
};

/// Strong-Wolfe line search (bracketing then zoom with cubic interpolation).
///
/// `loss0`/`grad0` are f and its gradient at `x`. Throws Error(usage) when
/// `direction` is not a descent direction. On failure the returned point is
/// the lowest one evaluated; status tells whether it satisfies Wolfe.
LineSearchResult wolfe_line_search(const Objective& f, const Vector& x, double loss0, const Vector& grad0,
                                   const Vector& direction, double initial_step, const LbfgsOptions& opts);

/// Convenience overload evaluating f at x first, initial step 1.
LineSearchResult wolfe_line_search(const Objective& f, const Vector& x, const Vector& direction,
                                   const LbfgsOptions& opts = {});

/// Largest component-wise relative error between the analytic gradient and
/// five-point central differences with step h. The relative error of a component is
/// |a - n| / max(|a|, |n|, floor), with floor = 1e-8.
double check_gradient(const Objective& f, const Vector& x, double h);

}  // namespace crcvote::optim
