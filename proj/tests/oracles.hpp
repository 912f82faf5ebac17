#pragma once

// Reference computations used only by the tests. They work from the raw MDP
// tables and enumerate state paths directly, so they share no code with the
// operator-based library routines they check.

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "opaque/envlib.hpp"
#include "opaque/opacity.hpp"
#include "opaque/random.hpp"

namespace oracle {

using opaque::Index;
using opaque::Mat;
using opaque::Vec;

// P(s' | s) under the policy, summed action by action.
inline double step_probability(const opaque::Mdp& mdp, const Mat& pi, Index s, Index s_next) {
  double p = 0.0;
  for (Index a = 0; a < mdp.num_actions(); ++a) p += pi(s, a) * mdp.transition[a](s_next, s);
  return p;
}

inline Index encode(const opaque::ObservationSequence& y, Index num_observations) {
  Index code = 0;
  for (Index o : y) code = code * num_observations + o;
  return code;
}

inline opaque::ObservationSequence decode(Index code, Index num_observations, std::size_t length) {
  opaque::ObservationSequence y(length);
  for (std::size_t t = length; t-- > 0;) {
    y[t] = code % num_observations;
    code /= num_observations;
  }
  return y;
}

// Joint P(Z = z, Y = y) for every y (row, lexicographic code) and label z (column),
// plus P(y | s0) for every (y, s0).
struct Joint {
  Mat secret;        // |O|^(T+1) x |Z|
  Mat given_initial; // |O|^(T+1) x N
  Index num_observations = 0;
  std::size_t length = 0;

  double probability(Index code) const { return secret.row(code).sum(); }
};

inline Joint brute_force_joint(const opaque::OpacityProblem& problem, const Mat& pi) {
  const opaque::Mdp& mdp = problem.mdp;
  const Mat& e = problem.observation.emission;
  const Index n = mdp.num_states();
  const Index o = problem.observation.num_observations();
  const std::size_t length = static_cast<std::size_t>(problem.horizon) + 1;
  Index sequences = 1;
  for (std::size_t t = 0; t < length; ++t) sequences *= o;

  Joint joint;
  joint.secret = Mat::Zero(sequences, problem.secret.num_labels());
  joint.given_initial = Mat::Zero(sequences, n);
  joint.num_observations = o;
  joint.length = length;

  std::vector<Index> path(length, 0);
  while (true) {
    double weight = 1.0;
    for (std::size_t t = 1; t < length && weight != 0.0; ++t) {
      weight *= step_probability(mdp, pi, path[t - 1], path[t]);
    }
    if (weight != 0.0) {
      const Index z = problem.secret.label_of_state[problem.secret.conditions_on_initial_state()
                                                        ? path.front()
                                                        : path.back()];
      for (Index code = 0; code < sequences; ++code) {
        const auto y = decode(code, o, length);
        double p = weight;
        for (std::size_t t = 0; t < length && p != 0.0; ++t) p *= e(path[t], y[t]);
        if (p == 0.0) continue;
        joint.given_initial(code, path.front()) += p;
        joint.secret(code, z) += mdp.initial(path.front()) * p;
      }
    }
    std::size_t t = 0;
    while (t < length && ++path[t] == n) path[t++] = 0;
    if (t == length) break;
  }
  return joint;
}

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

inline double entropy(const Joint& joint) {
  double h = 0.0;
  for (Index code = 0; code < joint.secret.rows(); ++code) {
    const double py = joint.probability(code);
    if (py <= 0.0) continue;
    for (Index z = 0; z < joint.secret.cols(); ++z) {
      const double pz = joint.secret(code, z);
      if (pz > 0.0) h -= pz * std::log2(pz / py);
    }
  }
  return h;
}

inline double guess_error(const Joint& joint) {
  double err = 0.0;
  for (Index code = 0; code < joint.secret.rows(); ++code) {
    err += joint.probability(code) - joint.secret.row(code).maxCoeff();
  }
  return err;
}

// Expected discounted return by enumerating state-action paths.
inline double brute_force_value(const opaque::Mdp& mdp, const Mat& pi, int horizon) {
  const Index n = mdp.num_states();
  const Index m = mdp.num_actions();
  double total = 0.0;
  std::function<void(int, Index, double, double)> walk = [&](int t, Index s, double p, double ret) {
    for (Index a = 0; a < m; ++a) {
      const double pa = p * pi(s, a);
      if (pa == 0.0) continue;
      const double r = ret + std::pow(mdp.discount, t) * mdp.reward(s, a);
      if (t == horizon) {
        total += pa * r;
        continue;
      }
      for (Index s2 = 0; s2 < n; ++s2) {
        const double q = mdp.transition[a](s2, s);
        if (q > 0.0) walk(t + 1, s2, pa * q, r);
      }
    }
  };
  for (Index s = 0; s < n; ++s) {
    if (mdp.initial(s) > 0.0) walk(0, s, mdp.initial(s), 0.0);
  }
  return total;
}

// Central differences; f maps a parameter vector to a vector.
inline Mat jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vec plus = x, minus = x;
    plus(k) += h;
    minus(k) -= h;
    j.col(k) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return j;
}

inline Vec scalar(double v) { return Vec::Constant(1, v); }

// The floor keeps central-difference round-off (about 1e-10 at h = 1e-6) from
// counting as a relative error when the true derivative is zero.
inline double relative_error(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-4);
}

inline opaque::SoftmaxPolicy random_policy(Index n, Index m, std::uint64_t seed, double scale = 1.0) {
  opaque::RandomStream rng(seed, 99);
  Vec theta(n * m);
  for (Index k = 0; k < theta.size(); ++k) theta(k) = scale * rng.normal();
  return opaque::SoftmaxPolicy(n, m, theta);
}

// Random small instance with sizes drawn from the seed (<= 5 states, <= 3
// actions, <= 4 observations, T <= 4). Every third instance uses the
// initial-state secret and every third a three-label terminal secret.
struct Instance {
  opaque::OpacityProblem problem;
  opaque::SoftmaxPolicy policy{1, 1};
};

inline Instance random_instance(std::uint64_t seed) {
  opaque::RandomStream rng(seed, 1234);
  const Index n = 2 + static_cast<Index>(rng.uniform() * 4);
  const Index m = 1 + static_cast<Index>(rng.uniform() * 3);
  const Index o = 2 + static_cast<Index>(rng.uniform() * 3);
  const int horizon = 1 + static_cast<int>(rng.uniform() * 4);
  const int variant = static_cast<int>(seed % 3);
  Instance inst;
  inst.problem = opaque::random_problem(n, m, o, horizon, seed, variant == 1);
  if (variant == 2) {
    std::vector<Index> labels(n);
    for (Index s = 0; s < n; ++s) labels[s] = s % 3;
    inst.problem.secret = opaque::terminal_labels(labels, {"x", "y", "z"});
  }
  inst.policy = random_policy(n, m, seed);
  return inst;
}

}  // namespace oracle
