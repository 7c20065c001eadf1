#include <cmath>

#include "crcvote/error.hpp"
#include "crcvote/learners.hpp"
#include "crcvote/random.hpp"
#include "math_util.hpp"

namespace crcvote {
namespace detail {

std::size_t mlp_parameter_count(int hidden_width) {
  auto h = static_cast<std::size_t>(hidden_width);
  return h * kNumFeatures + h + h + 1;
}

MlpModel mlp_from_parameters(int hidden_width, const optim::Vector& theta) {
  auto h = static_cast<std::size_t>(hidden_width);
  MlpModel m;
  m.hidden_width = hidden_width;
  auto it = theta.begin();
  m.hidden_weights.assign(it, it + static_cast<std::ptrdiff_t>(h * kNumFeatures));
  it += static_cast<std::ptrdiff_t>(h * kNumFeatures);
  m.hidden_bias.assign(it, it + static_cast<std::ptrdiff_t>(h));
  it += static_cast<std::ptrdiff_t>(h);
  m.output_weights.assign(it, it + static_cast<std::ptrdiff_t>(h));
  it += static_cast<std::ptrdiff_t>(h);
  m.output_bias = *it;
  return m;
}

optim::Vector mlp_initial_parameters(int hidden_width, std::uint64_t seed) {
  auto h = static_cast<std::size_t>(hidden_width);
  Rng rng(seed);
  auto draw = [&](double bound) {
    double v = 0.0;
    while (v == 0.0) {
      v = rng.uniform(-bound, bound);
    }
    return v;
  };
  optim::Vector theta;
  theta.reserve(mlp_parameter_count(hidden_width));
  const double input_bound = 1.0 / std::sqrt(static_cast<double>(kNumFeatures));
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t i = 0; i < h * kNumFeatures + h; ++i) {
    theta.push_back(draw(input_bound));
  }
  for (std::size_t i = 0; i < h + 1; ++i) {
    theta.push_back(draw(hidden_bound));
  }
  return theta;
}

optim::Objective mlp_objective(const StandardizedData& data, int hidden_width, double weight_decay) {
  return [&data, hidden_width, weight_decay](const optim::Vector& theta, optim::Vector& grad) {
    const auto h = static_cast<std::size_t>(hidden_width);
    const std::size_t w1 = 0;
    const std::size_t b1 = h * kNumFeatures;
    const std::size_t w2 = b1 + h;
    const std::size_t b2 = w2 + h;
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> act(h);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& z = data.rows[i];
      double out = theta[b2];
      for (std::size_t j = 0; j < h; ++j) {
        double a = theta[b1 + j];
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
          a += theta[w1 + j * kNumFeatures + f] * z[f];
        }
        act[j] = std::tanh(a);
        out += theta[w2 + j] * act[j];
      }
      double y = data.labels[i] == 1 ? 1.0 : 0.0;
      loss += softplus(out) - y * out;
      double delta = sigmoid(out) - y;
      grad[b2] += delta;
      for (std::size_t j = 0; j < h; ++j) {
        grad[w2 + j] += delta * act[j];
        double back = delta * theta[w2 + j] * (1.0 - act[j] * act[j]);
        grad[b1 + j] += back;
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
          grad[w1 + j * kNumFeatures + f] += back * z[f];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(data.size());
    loss *= inv_n;
    for (double& g : grad) {
      g *= inv_n;
    }
    double penalty = 0.0;
    auto decay = [&](std::size_t k) {
      penalty += theta[k] * theta[k];
      grad[k] += weight_decay * theta[k];
    };
    for (std::size_t k = w1; k < b1; ++k) {
      decay(k);
    }
    for (std::size_t k = w2; k < b2; ++k) {
      decay(k);
    }
    return loss + 0.5 * weight_decay * penalty;
  };
}

}  // namespace detail

TrainedClassifier train_mlp(const LabeledDataset& ds, const Hyperparams& hp) {
  auto [data, scaling] = standardize(ds);
  auto objective = detail::mlp_objective(data, hp.mlp.hidden_width, hp.mlp.weight_decay);
  optim::LbfgsOptions opts;
  opts.max_iterations = hp.mlp.max_iterations;

  std::optional<optim::Solution> best;
  for (int r = 0; r < hp.mlp.restarts; ++r) {
    auto theta0 = detail::mlp_initial_parameters(hp.mlp.hidden_width,
                                                 derive_seed(hp.seed, "mlp.restart", static_cast<std::uint64_t>(r)));
    auto solution = optim::lbfgs_minimize(objective, std::move(theta0), opts);
    if (!best || solution.final_loss < best->final_loss) {
      best = std::move(solution);
    }
  }
  return TrainedClassifier(LearnerKind::neural_network, scaling,
                           detail::mlp_from_parameters(hp.mlp.hidden_width, best->parameters), false,
                           best->loss_history);
}

}  // namespace crcvote
