#include "opaque/opacity.hpp"

#include <cmath>
#include <functional>

#include "opaque/parallel.hpp"

namespace opaque {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr std::size_t kChunk = 64;

// Bilinear weights whose values are P(Z = z, y): a terminal label reads
// alpha_T through class indicators, the initial state starts one forward
// sweep per class from mu0 restricted to that class.
struct ClassWeights {
  Mat start;
  Mat readout;
};

ClassWeights class_weights(const OpacityProblem& problem) {
  const Mat indicator = problem.secret.indicator();
  const Index n = problem.mdp.num_states();
  if (problem.secret.conditions_on_initial_state()) {
    return {problem.mdp.initial.asDiagonal() * indicator, Mat::Ones(n, 1)};
  }
  return {problem.mdp.initial, indicator};
}

struct Accumulator {
  double entropy = 0.0;
  double entropy_sq = 0.0;
  double mass = 0.0;
  std::size_t count = 0;
  Vec gradient;
  Mat hessian;

  Accumulator& operator+=(const Accumulator& other) {
    entropy += other.entropy;
    entropy_sq += other.entropy_sq;
    mass += other.mass;
    count += other.count;
    if (gradient.size()) gradient += other.gradient;
    if (hessian.size()) hessian += other.hessian;
    return *this;
  }
};

Accumulator zero_accumulator(Index parameters, bool with_gradient, bool with_hessian) {
  Accumulator acc;
  if (with_gradient) acc.gradient = Vec::Zero(parameters);
  if (with_hessian) acc.hessian = Mat::Zero(parameters, parameters);
  return acc;
}

// Fills `joint` and `grad` (D x Z) for one sequence.
void joint_and_gradient(const ObservableOperators<double>& ops, const ClassWeights& weights,
                        const ObservationSequence& y, Vec& joint, Mat& grad,
                        BilinearWorkspace<double>& ws, Mat& values) {
  bilinear_gradients(ops, weights.start, weights.readout, y, values, grad, ws);
  joint = values.reshaped();
}

}  // namespace

const char* to_string(EstimationMode mode) {
  return mode == EstimationMode::exact ? "exact" : "sampled";
}

void OpacityProblem::validate() const {
  mdp.validate();
  observation.validate();
  if (observation.num_states() != mdp.num_states()) {
    throw ModelError("observation model does not cover every state");
  }
  secret.validate(mdp.num_states());
  if (horizon < 0) throw InputError("horizon must be nonnegative");
}

void check_enumeration_cap(Index num_observations, int horizon, double cap) {
  const double count = std::pow(static_cast<double>(num_observations), horizon + 1.0);
  if (count > cap) {
    throw CapExceeded("exact enumeration needs " + std::to_string(num_observations) + "^" +
                      std::to_string(horizon + 1) + " sequences, above the cap of " +
                      std::to_string(static_cast<long long>(cap)) + "; use sampled mode");
  }
}

std::vector<ObservationSequence> enumerate_sequences(const ObservableOperators<double>& ops,
                                                     const Vec& mu0, int horizon, double cap) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  check_enumeration_cap(ops.num_observations(), horizon, cap);
  const std::size_t length = static_cast<std::size_t>(horizon) + 1;
  std::vector<ObservationSequence> out;
  ObservationSequence y(length);
  std::vector<Vec> alpha(length);
  std::function<void(std::size_t)> extend = [&](std::size_t t) {
    const Vec predicted = t == 0 ? mu0 : Vec(ops.chain() * alpha[t - 1]);
    for (Index o = 0; o < ops.num_observations(); ++o) {
      alpha[t] = ops.emission_column(o).cwiseProduct(predicted);
      if (!(alpha[t].sum() > kNegligibleProbability)) continue;
      y[t] = o;
      if (t + 1 == length) {
        out.push_back(y);
      } else {
        extend(t + 1);
      }
    }
  };
  extend(0);
  return out;
}

Vec secret_joint(const OpacityProblem& problem, const ObservableOperators<double>& ops,
                 const ObservationSequence& y) {
  const Mat indicator = problem.secret.indicator();
  if (problem.secret.conditions_on_initial_state()) {
    const MessageStack<double> msg = backward_messages(ops, y, 0);
    return indicator.transpose() * problem.mdp.initial.cwiseProduct(msg.beta.front());
  }
  return indicator.transpose() * terminal_joint(ops, problem.mdp.initial, y);
}

std::vector<SequencePosterior> enumerate_posteriors(const OpacityProblem& problem,
                                                    const SoftmaxPolicy& policy, double cap) {
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 0);
  const auto sequences = enumerate_sequences(ops, problem.mdp.initial, problem.horizon, cap);
  std::vector<SequencePosterior> out(sequences.size());
  parallel_for(sequences.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].y = sequences[i];
      out[i].joint = secret_joint(problem, ops, sequences[i]);
      out[i].probability = out[i].joint.sum();
    }
  });
  return out;
}

EntropyReport exact_conditional_entropy(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                        double cap) {
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 0);
  const auto sequences = enumerate_sequences(ops, problem.mdp.initial, problem.horizon, cap);
  Accumulator total = ordered_chunk_reduce(
      sequences.size(), kChunk, zero_accumulator(0, false, false),
      [&](std::size_t begin, std::size_t end, Accumulator& acc) {
        for (std::size_t i = begin; i < end; ++i) {
          const Vec joint = secret_joint(problem, ops, sequences[i]);
          const double py = joint.sum();
          if (!(py > kNegligibleProbability)) continue;
          acc.mass += py;
          ++acc.count;
          for (Index z = 0; z < joint.size(); ++z) {
            if (joint(z) > 0.0) acc.entropy -= joint(z) * std::log2(joint(z) / py);
          }
        }
      });
  EntropyReport report;
  report.entropy = total.entropy;
  report.sequences = total.count;
  report.probability_mass = total.mass;
  return report;
}

EntropyReport exact_entropy_gradient(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                     double cap) {
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 1);
  const auto sequences = enumerate_sequences(ops, problem.mdp.initial, problem.horizon, cap);
  const ClassWeights weights = class_weights(problem);
  const Index d = ops.num_parameters();
  Accumulator total = ordered_chunk_reduce(
      sequences.size(), kChunk, zero_accumulator(d, true, false),
      [&](std::size_t begin, std::size_t end, Accumulator& acc) {
        BilinearWorkspace<double> ws;
        Mat values, grad;
        Vec joint;
        for (std::size_t i = begin; i < end; ++i) {
          joint_and_gradient(ops, weights, sequences[i], joint, grad, ws, values);
          const double py = joint.sum();
          if (!(py > kNegligibleProbability)) continue;
          const Vec grad_py = grad.rowwise().sum();
          acc.mass += py;
          ++acc.count;
          for (Index z = 0; z < joint.size(); ++z) {
            if (!(joint(z) > 0.0)) continue;
            const double p = joint(z) / py;
            const double log_p = std::log2(p);
            acc.entropy -= joint(z) * log_p;
            // P(y) grad p_z = grad P(z, y) - p_z grad P(y)
            acc.gradient -= grad.col(z) * log_p + (grad.col(z) - p * grad_py) / kLn2;
          }
        }
      });
  EntropyReport report;
  report.entropy = total.entropy;
  report.gradient = std::move(total.gradient);
  report.sequences = total.count;
  report.probability_mass = total.mass;
  return report;
}

EntropyReport entropy_hessian(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                              double cap) {
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 2);
  const auto sequences = enumerate_sequences(ops, problem.mdp.initial, problem.horizon, cap);
  const Index d = ops.num_parameters();
  const Index labels = problem.secret.num_labels();
  const bool initial = problem.secret.conditions_on_initial_state();
  const Vec& mu0 = problem.mdp.initial;

  Accumulator total = ordered_chunk_reduce(
      sequences.size(), kChunk, zero_accumulator(d, true, true),
      [&](std::size_t begin, std::size_t end, Accumulator& acc) {
        for (std::size_t i = begin; i < end; ++i) {
          const auto& y = sequences[i];
          Vec joint = Vec::Zero(labels);
          Mat grad = Mat::Zero(d, labels);
          std::vector<Mat> hess(labels, Mat::Zero(d, d));
          if (initial) {
            const auto msg = backward_messages(ops, y, 2);
            for (Index s = 0; s < ops.num_states(); ++s) {
              if (mu0(s) == 0.0) continue;
              const Index z = problem.secret.label_of_state[s];
              joint(z) += mu0(s) * msg.beta.front()(s);
              grad.col(z) += mu0(s) * msg.beta_grad.front().row(s).transpose();
              hess[z] += mu0(s) * msg.beta_hess.front()[s];
            }
          } else {
            const auto msg = forward_messages(ops, mu0, y, 2);
            for (Index s = 0; s < ops.num_states(); ++s) {
              const Index z = problem.secret.label_of_state[s];
              joint(z) += msg.alpha.back()(s);
              grad.col(z) += msg.alpha_grad.back().row(s).transpose();
              hess[z] += msg.alpha_hess.back()[s];
            }
          }
          const double py = joint.sum();
          if (!(py > kNegligibleProbability)) continue;
          const Vec grad_py = grad.rowwise().sum();
          acc.mass += py;
          ++acc.count;
          for (Index z = 0; z < labels; ++z) {
            if (!(joint(z) > 0.0)) continue;
            const double p = joint(z) / py;
            const double log_p = std::log2(p);
            const Vec grad_p = (grad.col(z) - p * grad_py) / py;
            acc.entropy -= joint(z) * log_p;
            acc.gradient -= grad.col(z) * log_p + py * grad_p / kLn2;
            // The sum over z of P(y) grad p_z vanishes identically, so only the
            // P(z, y) log2 p_z part contributes to the Hessian.
            acc.hessian -= hess[z] * log_p + grad.col(z) * grad_p.transpose() / (p * kLn2);
          }
        }
      });
  EntropyReport report;
  report.entropy = total.entropy;
  report.gradient = std::move(total.gradient);
  report.hessian = 0.5 * (total.hessian + total.hessian.transpose());
  report.sequences = total.count;
  report.probability_mass = total.mass;
  return report;
}

EntropyReport sampled_entropy_and_gradient(const OpacityProblem& problem,
                                           const SoftmaxPolicy& policy, std::size_t samples,
                                           std::uint64_t seed) {
  const TrajectoryBatch batch =
      sample_batch(problem.mdp, policy, problem.observation, problem.horizon, samples, seed);
  return sampled_entropy_and_gradient(problem, policy, batch);
}

EntropyReport sampled_entropy_and_gradient(const OpacityProblem& problem,
                                           const SoftmaxPolicy& policy,
                                           const TrajectoryBatch& batch) {
  if (batch.trajectories.empty()) throw InputError("sampled estimate needs at least one sequence");
  const auto ops = build_operators(problem.mdp, policy, problem.observation, 1);
  const ClassWeights weights = class_weights(problem);
  const Index d = ops.num_parameters();
  const std::size_t m = batch.trajectories.size();

  Accumulator total = ordered_chunk_reduce(
      m, kChunk, zero_accumulator(d, true, false),
      [&](std::size_t begin, std::size_t end, Accumulator& acc) {
        BilinearWorkspace<double> ws;
        Mat values, grad;
        Vec joint;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& y = batch.trajectories[i].observations;
          if (y.empty()) throw InputError("batch was sampled without observations");
          joint_and_gradient(ops, weights, y, joint, grad, ws, values);
          const double py = joint.sum();
          ++acc.count;
          if (!(py > kNegligibleProbability)) continue;
          const Vec grad_py = grad.rowwise().sum();
          double neg_entropy = 0.0;  // sum_z p_z log2 p_z
          Vec term = Vec::Zero(d);
          for (Index z = 0; z < joint.size(); ++z) {
            if (!(joint(z) > 0.0)) continue;
            const double p = joint(z) / py;
            const double log_p = std::log2(p);
            neg_entropy += p * log_p;
            const Vec grad_p = (grad.col(z) - p * grad_py) / py;
            term += grad_p * (log_p + 1.0 / kLn2);
          }
          term += neg_entropy * grad_py / py;
          acc.entropy -= neg_entropy;
          acc.entropy_sq += neg_entropy * neg_entropy;
          acc.gradient -= term;
        }
      });
  const double count = static_cast<double>(m);
  EntropyReport report;
  report.mode = EstimationMode::sampled;
  report.entropy = total.entropy / count;
  report.gradient = total.gradient / count;
  report.sequences = m;
  report.seed = batch.seed;
  if (m > 1) {
    const double var = std::max(0.0, (total.entropy_sq - count * report.entropy * report.entropy) /
                                         (count - 1.0));
    report.standard_error = std::sqrt(var / count);
  }
  return report;
}

}  // namespace opaque
