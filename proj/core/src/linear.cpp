#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "crcvote/error.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/random.hpp"
#include "math_util.hpp"

namespace crcvote {
namespace {

constexpr int kLogisticParams = static_cast<int>(kNumFeatures) + 1;
using Theta = Eigen::Matrix<double, kLogisticParams, 1>;
using Hessian = Eigen::Matrix<double, kLogisticParams, kLogisticParams>;

double logistic_margin(const Theta& theta, const FeatureRow& z) {
  double m = theta[kLogisticParams - 1];
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    m += theta[static_cast<Eigen::Index>(f)] * z[f];
  }
  return m;
}

double logistic_loss(const StandardizedData& data, double lambda, const Theta& theta) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double m = logistic_margin(theta, data.rows[i]);
    loss += detail::softplus(m) - (data.labels[i] == 1 ? m : 0.0);
  }
  double penalty = theta.head<kNumFeatures>().squaredNorm();
  return loss + 0.5 * lambda * penalty;
}

/// Fits sigmoid(a * margin + c) to smoothed targets by Newton's method with
/// backtracking; positives target (N+ + 1)/(N+ + 2), negatives 1/(N- + 2).
std::pair<double, double> fit_platt(std::span<const double> margins, std::span<const int> labels) {
  double n_pos = 0.0;
  double n_neg = 0.0;
  for (int y : labels) {
    (y == 1 ? n_pos : n_neg) += 1.0;
  }
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  auto loss_at = [&](double a, double c) {
    double loss = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      double t = labels[i] == 1 ? hi : lo;
      double u = a * margins[i] + c;
      loss += detail::softplus(u) - t * u;
    }
    return loss;
  };
  double a = 0.0;
  double c = std::log((n_pos + 1.0) / (n_neg + 1.0));
  double loss = loss_at(a, c);
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0.0, gc = 0.0, haa = 1e-12, hac = 0.0, hcc = 1e-12;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      double t = labels[i] == 1 ? hi : lo;
      double p = detail::sigmoid(a * margins[i] + c);
      double r = p - t;
      double w = p * (1.0 - p);
      ga += r * margins[i];
      gc += r;
      haa += w * margins[i] * margins[i];
      hac += w * margins[i];
      hcc += w;
    }
    if (std::max(std::abs(ga), std::abs(gc)) < 1e-10) {
      break;
    }
    double det = haa * hcc - hac * hac;
    double da = -(hcc * ga - hac * gc) / det;
    double dc = -(haa * gc - hac * ga) / det;
    double slope = ga * da + gc * dc;
    double step = 1.0;
    bool moved = false;
    while (step > 1e-10) {
      double trial = loss_at(a + step * da, c + step * dc);
      if (trial <= loss + 1e-4 * step * slope) {
        a += step * da;
        c += step * dc;
        loss = trial;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) {
      break;
    }
  }
  return {a, c};
}

}  // namespace

namespace detail {

optim::Objective logistic_objective(const StandardizedData& data, double lambda) {
  return [&data, lambda](const optim::Vector& x, optim::Vector& grad) {
    Theta theta;
    for (int j = 0; j < kLogisticParams; ++j) {
      theta[j] = x[static_cast<std::size_t>(j)];
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double m = logistic_margin(theta, data.rows[i]);
      double y = data.labels[i] == 1 ? 1.0 : 0.0;
      loss += softplus(m) - y * m;
      double r = sigmoid(m) - y;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        grad[f] += r * data.rows[i][f];
      }
      grad[kNumFeatures] += r;
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      loss += 0.5 * lambda * x[f] * x[f];
      grad[f] += lambda * x[f];
    }
    return loss;
  };
}

}  // namespace detail

TrainedClassifier train_logistic(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  const double lambda = hp.logistic.lambda;
  Theta theta = Theta::Zero();
  double loss = logistic_loss(data, lambda, theta);
  for (int iter = 0; iter < hp.logistic.max_iterations; ++iter) {
    Theta grad = Theta::Zero();
    Hessian hess = Hessian::Zero();
    for (std::size_t i = 0; i < data.size(); ++i) {
      Theta zt;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        zt[static_cast<Eigen::Index>(f)] = data.rows[i][f];
      }
      zt[kLogisticParams - 1] = 1.0;
      double p = detail::sigmoid(logistic_margin(theta, data.rows[i]));
      grad += (p - static_cast<double>(data.labels[i])) * zt;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(zt, p * (1.0 - p));
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    for (int f = 0; f < static_cast<int>(kNumFeatures); ++f) {
      grad[f] += lambda * theta[f];
      hess(f, f) += lambda;
    }
    if (grad.lpNorm<Eigen::Infinity>() <= hp.logistic.grad_tolerance) {
      break;
    }
    Eigen::LDLT<Hessian> ldlt(hess);
    Theta direction = -ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !direction.allFinite() || direction.dot(grad) >= 0.0) {
      direction = -grad;
    }
    // Damped Newton: halve the step until the Armijo condition holds.
    double step = 1.0;
    bool moved = false;
    while (step > 1e-12) {
      Theta trial = theta + step * direction;
      double trial_loss = logistic_loss(data, lambda, trial);
      if (trial_loss <= loss + 1e-4 * step * direction.dot(grad)) {
        theta = trial;
        loss = trial_loss;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) {
      break;
    }
  }
  LogisticModel model;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    model.weights[f] = theta[static_cast<Eigen::Index>(f)];
  }
  model.intercept = theta[kLogisticParams - 1];
  return TrainedClassifier(LearnerKind::logistic_regression, scaling, model);
}

TrainedClassifier train_svm(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  const std::size_t n = data.size();
  const double c = hp.svm.c;
  // The bias is learned as the weight of a constant 1 feature, so the primal
  // is 0.5 (|w|^2 + b^2) + C sum hinge(y (w.x + b)).
  std::vector<double> y(n);
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = data.labels[i] == 1 ? 1.0 : -1.0;
    double sq = 1.0;
    for (double v : data.rows[i]) {
      sq += v * v;
    }
    q[i] = sq;
  }
  std::array<double, kNumFeatures + 1> w{};
  auto decision = [&](std::size_t i) {
    double m = w[kNumFeatures];
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      m += w[f] * data.rows[i][f];
    }
    return m;
  };
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(hp.seed, "svm.order"));

  for (int pass = 0; pass < hp.svm.max_passes; ++pass) {
    rng.shuffle(order.begin(), order.end());
    for (auto i : order) {
      double g = y[i] * decision(i) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] >= c) {
        pg = std::max(g, 0.0);
      }
      if (pg == 0.0) {
        continue;
      }
      double updated = std::clamp(alpha[i] - g / q[i], 0.0, c);
      double delta = (updated - alpha[i]) * y[i];
      alpha[i] = updated;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        w[f] += delta * data.rows[i][f];
      }
      w[kNumFeatures] += delta;
    }
    double wsq = 0.0;
    for (double v : w) {
      wsq += v * v;
    }
    double hinge = 0.0;
    double alpha_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      hinge += std::max(0.0, 1.0 - y[i] * decision(i));
      alpha_sum += alpha[i];
    }
    double primal = 0.5 * wsq + c * hinge;
    double dual = alpha_sum - 0.5 * wsq;
    if (primal - dual <= hp.svm.gap_tolerance * std::max(1.0, std::abs(primal))) {
      break;
    }
  }

  SvmModel model;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    model.weights[f] = w[f];
  }
  model.bias = w[kNumFeatures];
  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) {
    margins[i] = model.margin(data.rows[i]);
  }
  std::tie(model.platt_a, model.platt_c) = fit_platt(margins, data.labels);
  return TrainedClassifier(LearnerKind::linear_svm, scaling, model);
}

}  // namespace crcvote
