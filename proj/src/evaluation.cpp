#include "opaque/evaluation.hpp"

#include <cmath>

#include "opaque/parallel.hpp"
#include "opaque/random.hpp"
#include "opaque/sampling.hpp"

namespace opaque {

namespace {

// Entropy (bits) of each state's action distribution and its gradient block
// d h(s) / d theta_{s,b} = -pi_b (log2 pi_b + h(s)).
void policy_entropy_terms(const Mat& pi, Vec& h, Mat& grad_h) {
  h = Vec::Zero(pi.rows());
  grad_h = Mat::Zero(pi.rows(), pi.cols());
  for (Index s = 0; s < pi.rows(); ++s) {
    for (Index a = 0; a < pi.cols(); ++a) {
      if (pi(s, a) > 0.0) h(s) -= pi(s, a) * std::log2(pi(s, a));
    }
    for (Index a = 0; a < pi.cols(); ++a) {
      if (pi(s, a) > 0.0) grad_h(s, a) = -pi(s, a) * (std::log2(pi(s, a)) + h(s));
    }
  }
}

struct Tally {
  double error = 0.0;
  double error_sq = 0.0;
  Tally& operator+=(const Tally& o) {
    error += o.error;
    error_sq += o.error_sq;
    return *this;
  }
};

}  // namespace

Index map_estimate(const Vec& posterior) {
  if (posterior.size() == 0) throw InputError("posterior is empty");
  Index best = 0;
  for (Index z = 1; z < posterior.size(); ++z) {
    if (posterior(z) > posterior(best)) best = z;
  }
  return best;
}

GuessErrorReport guess_error_exact(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                   double cap) {
  const auto rows = enumerate_posteriors(problem, policy, cap);
  GuessErrorReport report;
  report.mode = EstimationMode::exact;
  for (const auto& r : rows) {
    if (!(r.probability > kNegligibleProbability)) continue;
    // P(y) (1 - max_z P(z|y)) = P(y) - max_z P(z, y)
    const double miss = 1.0 - r.joint(map_estimate(r.joint)) / r.probability;
    report.error += r.probability - r.joint(map_estimate(r.joint));
    report.breakdown.push_back({r.y, r.probability, miss});
  }
  report.sequences = report.breakdown.size();
  return report;
}

GuessErrorReport guess_error_sampled(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                     std::size_t samples, std::uint64_t seed) {
  const TrajectoryBatch batch =
      sample_batch(problem.mdp, policy, problem.observation, problem.horizon, samples, seed);
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 0);
  const Tally total = ordered_chunk_reduce(
      batch.size(), 64, Tally{}, [&](std::size_t begin, std::size_t end, Tally& acc) {
        for (std::size_t i = begin; i < end; ++i) {
          const Vec joint = secret_joint(problem, ops, batch.trajectories[i].observations);
          const double py = joint.sum();
          if (!(py > kNegligibleProbability)) continue;
          const double miss = 1.0 - joint(map_estimate(joint)) / py;
          acc.error += miss;
          acc.error_sq += miss * miss;
        }
      });
  const double m = static_cast<double>(samples);
  GuessErrorReport report;
  report.mode = EstimationMode::sampled;
  report.sequences = samples;
  report.error = total.error / m;
  if (samples > 1) {
    const double var = std::max(0.0, (total.error_sq - m * report.error * report.error) / (m - 1.0));
    report.standard_error = std::sqrt(var / m);
  }
  return report;
}

GuessErrorReport guess_error(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                             EstimationMode mode, std::size_t samples, std::uint64_t seed,
                             double cap) {
  return mode == EstimationMode::exact ? guess_error_exact(problem, policy, cap)
                                       : guess_error_sampled(problem, policy, samples, seed);
}

void BaselineConfig::validate() const {
  if (!(tau >= 0.0)) throw InputError("tau must be nonnegative");
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  if (iterations < 0) throw InputError("iteration count must be nonnegative");
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (samples == 0) throw InputError("sample size must be positive");
}

double regularized_objective(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon, double tau) {
  return finite_horizon_value(mdp, policy, horizon) +
         tau * discounted_policy_entropy(mdp, policy, horizon);
}

Vec regularized_gradient(const Mdp& mdp, const SoftmaxPolicy& policy, const TrajectoryBatch& batch,
                         double tau) {
  const Mat pi = policy.probabilities();
  Vec h;
  Mat grad_h;
  policy_entropy_terms(pi, h, grad_h);
  const Index m = mdp.num_actions();
  Vec grad = Vec::Zero(policy.num_parameters());
  for (const auto& tr : batch.trajectories) {
    double augmented = tr.discounted_return;
    double weight = 1.0;
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      const Index s = tr.states[t];
      augmented += tau * weight * h(s);
      grad.segment(s * m, m) += tau * weight * grad_h.row(s).transpose();
      weight *= mdp.discount;
    }
    if (augmented != 0.0) grad += augmented * score_function(tr, policy);
  }
  return grad / static_cast<double>(batch.size());
}

SoftmaxPolicy entropy_regularized_solve(const Mdp& mdp, const BaselineConfig& config) {
  config.validate();
  mdp.validate();
  SoftmaxPolicy policy(mdp.num_states(), mdp.num_actions(), config.theta_min, config.theta_max);
  for (long k = 1; k <= config.iterations; ++k) {
    const TrajectoryBatch batch = sample_batch(mdp, policy, nullptr, config.horizon, config.samples,
                                               stream_seed(config.seed, static_cast<std::uint64_t>(k)));
    const Vec grad = regularized_gradient(mdp, policy, batch, config.tau);
    if (!grad.allFinite()) throw NumericalError("non-finite baseline gradient");
    const double step =
        config.learning_rate * std::pow(static_cast<double>(k), -config.xi) / (1.0 + config.tau);
    policy.set_theta(policy.theta() + step * grad);
  }
  return policy;
}

}  // namespace opaque
