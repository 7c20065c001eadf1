#include "crcvote/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "crcvote/error.hpp"

namespace crcvote::optim {
namespace {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double inf_norm(const Vector& v) {
  double m = 0.0;
  for (double e : v) {
    m = std::max(m, std::abs(e));
  }
  return m;
}

bool all_finite(const Vector& v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

/// One evaluated point on the search line.
struct Probe {
  double step = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Vector x;
  Vector grad;
};

class LineFunction {
 public:
  LineFunction(const Objective& f, const Vector& x, const Vector& d) : f_(f), x_(x), d_(d) {}

  Probe at(double step) {
    Probe p;
    p.step = step;
    p.x.resize(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) {
      p.x[i] = x_[i] + step * d_[i];
    }
    p.grad.assign(x_.size(), 0.0);
    p.phi = f_(p.x, p.grad);
    ++evaluations;
    if (!std::isfinite(p.phi)) {
      // Overflowing trial points count as "too high" and are backtracked from.
      p.phi = std::numeric_limits<double>::infinity();
      p.dphi = std::numeric_limits<double>::quiet_NaN();
      return p;
    }
    if (!all_finite(p.grad)) {
      throw Error(ErrorCategory::numeric, "non-finite gradient at line-search step " + std::to_string(step));
    }
    p.dphi = dot(p.grad, d_);
    return p;
  }

  int evaluations = 0;

 private:
  const Objective& f_;
  const Vector& x_;
  const Vector& d_;
};

/// Minimizer of the cubic matching values and slopes at a and b, or NaN when
/// the cubic has no interior minimizer.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double d2 = std::copysign(std::sqrt(disc), b - a);
  double denom = db - da + 2.0 * d2;
  if (denom == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return b - (b - a) * (db + d2 - d1) / denom;
}

}  // namespace

void LbfgsOptions::validate() const {
  if (memory < 1) {
    throw Error(ErrorCategory::usage, "lbfgs memory must be >= 1");
  }
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw Error(ErrorCategory::usage, "wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (!(grad_tolerance > 0.0)) {
    throw Error(ErrorCategory::usage, "grad_tolerance must be > 0");
  }
  if (max_iterations < 0 || max_line_search_evaluations < 1) {
    throw Error(ErrorCategory::usage, "iteration budgets must be non-negative");
  }
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance:
      return "gradient_tolerance";
    case Termination::max_iterations:
      return "max_iterations";
    case Termination::line_search_failure:
      return "line_search_failure";
  }
  return "unknown";
}

LineSearchResult wolfe_line_search(const Objective& f, const Vector& x, double loss0, const Vector& grad0,
                                   const Vector& direction, double initial_step, const LbfgsOptions& opts) {
  const double dphi0 = dot(grad0, direction);
  if (!(dphi0 < 0.0)) {
    throw Error(ErrorCategory::usage, "line search direction is not a descent direction");
  }
  LineFunction line(f, x, direction);
  const double phi0 = loss0;
  auto sufficient = [&](const Probe& p) { return p.phi <= phi0 + opts.c1 * p.step * dphi0; };
  auto curvature = [&](const Probe& p) { return std::abs(p.dphi) <= -opts.c2 * dphi0; };

  Probe origin{0.0, phi0, dphi0, x, grad0};
  Probe best = origin;
  auto remember = [&](const Probe& p) {
    if (p.phi < best.phi) {
      best = p;
    }
  };

  auto finish = [&](Probe p, LineSearchStatus status) {
    LineSearchResult r;
    r.status = status;
    r.step = p.step;
    r.loss = p.phi;
    r.x = std::move(p.x);
    r.gradient = std::move(p.grad);
    r.evaluations = line.evaluations;
    return r;
  };

  auto refine = [&](Probe accepted) {
    if (!opts.refine_step || line.evaluations >= opts.max_line_search_evaluations) {
      return accepted;
    }
    // Secant on the slopes. Exact on quadratics, and unlike the cubic it does
    // not need function differences, which vanish into rounding near a minimum.
    if (!(accepted.dphi > dphi0)) {
      return accepted;
    }
    double t = accepted.step * dphi0 / (dphi0 - accepted.dphi);
    if (!std::isfinite(t) || t <= 0.0 || t > 10.0 * accepted.step ||
        std::abs(t - accepted.step) <= 1e-10 * accepted.step) {
      return accepted;
    }
    Probe candidate = line.at(t);
    if (sufficient(candidate) && curvature(candidate) && candidate.phi <= accepted.phi) {
      return candidate;
    }
    return accepted;
  };

  auto zoom = [&](Probe lo, Probe hi) -> LineSearchResult {
    while (line.evaluations < opts.max_line_search_evaluations) {
      double width = hi.step - lo.step;
      if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.step))) {
        break;
      }
      double t = std::isfinite(hi.phi) ? cubic_minimizer(lo.step, lo.phi, lo.dphi, hi.step, hi.phi, hi.dphi)
                                       : std::numeric_limits<double>::quiet_NaN();
      double left = std::min(lo.step, hi.step);
      double right = std::max(lo.step, hi.step);
      double margin = 0.1 * (right - left);
      if (!std::isfinite(t) || t < left + margin || t > right - margin) {
        t = 0.5 * (lo.step + hi.step);
      }
      Probe p = line.at(t);
      remember(p);
      if (!sufficient(p) || p.phi >= lo.phi) {
        hi = std::move(p);
        continue;
      }
      if (curvature(p)) {
        return finish(refine(std::move(p)), LineSearchStatus::success);
      }
      if (p.dphi * (hi.step - lo.step) >= 0.0) {
        hi = lo;
      }
      lo = std::move(p);
    }
    return finish(best, LineSearchStatus::bracketing_exhausted);
  };

  Probe previous = origin;
  double step = initial_step > 0.0 ? initial_step : 1.0;
  for (int i = 0; line.evaluations < opts.max_line_search_evaluations; ++i) {
    Probe p = line.at(step);
    remember(p);
    if (!sufficient(p) || (i > 0 && p.phi >= previous.phi)) {
      return zoom(std::move(previous), std::move(p));
    }
    if (curvature(p)) {
      return finish(refine(std::move(p)), LineSearchStatus::success);
    }
    if (p.dphi >= 0.0) {
      return zoom(std::move(p), std::move(previous));
    }
    previous = std::move(p);
    step *= 2.0;
  }
  return finish(best, LineSearchStatus::bracketing_exhausted);
}

LineSearchResult wolfe_line_search(const Objective& f, const Vector& x, const Vector& direction,
                                   const LbfgsOptions& opts) {
  Vector grad(x.size(), 0.0);
  double loss = f(x, grad);
  return wolfe_line_search(f, x, loss, grad, direction, 1.0, opts);
}

Solution lbfgs_minimize(const Objective& f, Vector x0, const LbfgsOptions& opts) {
  opts.validate();
  const std::size_t n = x0.size();
  Solution sol;
  Vector x = std::move(x0);
  Vector g(n, 0.0);
  double loss = f(x, g);
  if (!std::isfinite(loss) || !all_finite(g)) {
    throw Error(ErrorCategory::numeric, "non-finite loss or gradient at iteration 0");
  }
  sol.loss_history.push_back(loss);

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;

  int iteration = 0;
  while (true) {
    if (inf_norm(g) <= opts.grad_tolerance) {
      sol.termination = Termination::gradient_tolerance;
      break;
    }
    if (iteration >= opts.max_iterations) {
      sol.termination = Termination::max_iterations;
      break;
    }

    // Two-loop recursion: d = -H g.
    Vector d = g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m, 0.0);
    for (std::size_t j = m; j-- > 0;) {
      alpha[j] = rho_hist[j] * dot(s_hist[j], d);
      for (std::size_t i = 0; i < n; ++i) {
        d[i] -= alpha[j] * y_hist[j][i];
      }
    }
    if (m > 0) {
      double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (double& e : d) {
        e *= gamma;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      double beta = rho_hist[j] * dot(y_hist[j], d);
      for (std::size_t i = 0; i < n; ++i) {
        d[i] += (alpha[j] - beta) * s_hist[j][i];
      }
    }
    for (double& e : d) {
      e = -e;
    }
    if (!(dot(d, g) < 0.0)) {
      // Lost descent through rounding; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = -g[i];
      }
    }

    double initial = 1.0;
    if (s_hist.empty()) {
      initial = std::min(1.0, 1.0 / std::sqrt(dot(g, g)));
    }

    LineSearchResult ls;
    try {
      ls = wolfe_line_search(f, x, loss, g, d, initial, opts);
    } catch (const Error& e) {
      throw Error(e.category(), "iteration " + std::to_string(iteration + 1) + ": " + e.what());
    }
    if (ls.status != LineSearchStatus::success) {
      if (ls.loss < loss) {
        x = std::move(ls.x);
        g = std::move(ls.gradient);
        loss = ls.loss;
        ++iteration;
        sol.loss_history.push_back(loss);
      }
      sol.termination = Termination::line_search_failure;
      break;
    }

    Vector s(n);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ls.x[i] - x[i];
      y[i] = ls.gradient[i] - g[i];
    }
    double sy = dot(s, y);
    x = std::move(ls.x);
    g = std::move(ls.gradient);
    loss = ls.loss;
    ++iteration;
    sol.loss_history.push_back(loss);

    if (sy > 1e-10) {
      if (static_cast<int>(s_hist.size()) == opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
  }

  sol.parameters = std::move(x);
  sol.final_loss = loss;
  sol.iterations = iteration;
  sol.converged = sol.termination == Termination::gradient_tolerance;
  return sol;
}

double check_gradient(const Objective& f, const Vector& x, double h) {
  const std::size_t n = x.size();
  Vector analytic(n, 0.0);
  f(x, analytic);
  Vector scratch(n, 0.0);
  Vector probe = x;
  double worst = 0.0;
  auto at = [&](std::size_t i, double offset) {
    probe[i] = x[i] + offset;
    double value = f(probe, scratch);
    probe[i] = x[i];
    return value;
  };
  for (std::size_t i = 0; i < n; ++i) {
    // Five-point stencil: truncation error O(h^4).
    double numeric = (8.0 * (at(i, h) - at(i, -h)) - (at(i, 2.0 * h) - at(i, -2.0 * h))) / (12.0 * h);
    double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace crcvote::optim
