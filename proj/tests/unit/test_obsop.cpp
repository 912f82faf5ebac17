#include <doctest.h>

#include "opaque/obsop.hpp"
#include "opaque/opacity.hpp"
#include "oracles.hpp"

using namespace opaque;

TEST_CASE("sequence probabilities match path enumeration") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const OpacityProblem& pr = inst.problem;
    const auto ops = build_operators(pr.mdp, inst.policy, pr.observation, 0);
    const auto joint = oracle::brute_force_joint(pr, inst.policy.probabilities());
    double mass = 0.0;
    for (Index code = 0; code < joint.secret.rows(); ++code) {
      const auto y = oracle::decode(code, joint.num_observations, joint.length);
      const double p = observation_probability(ops, pr.mdp.initial, y);
      CHECK(std::abs(p - joint.probability(code)) < 1e-12);
      CHECK(std::abs(operator_product(ops, y).transpose().rowwise().sum().dot(pr.mdp.initial) - p) < 1e-12);
      for (Index s0 = 0; s0 < pr.mdp.num_states(); ++s0) {
        CHECK(std::abs(probability_given_initial(ops, y, s0) - joint.given_initial(code, s0)) < 1e-12);
      }
      mass += p;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward and backward messages agree") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const OpacityProblem& pr = inst.problem;
    const auto ops = build_operators(pr.mdp, inst.policy, pr.observation, 1);
    for (const auto& y : enumerate_sequences(ops, pr.mdp.initial, pr.horizon)) {
      const auto fwd = forward_messages(ops, pr.mdp.initial, y, 1);
      const auto bwd = backward_messages(ops, y, 1);
      const double p = fwd.probability();
      CHECK(std::abs(pr.mdp.initial.dot(bwd.beta.front()) - p) < 1e-12);
      // alpha_t . (beta_t / e(o_t)) is P(y) at every t; compare at t = 0.
      CHECK(std::abs((fwd.alpha.front().array() * bwd.beta.front().array() /
                      ops.emission_column(y[0]).array().max(1e-300)).sum() - p) < 1e-12);
      const Vec g_fwd = fwd.gradient();
      const Vec g_bwd = bwd.beta_grad.front().transpose() * pr.mdp.initial;
      CHECK((g_fwd - g_bwd).norm() < 1e-12 * std::max(1.0, g_fwd.norm()));
    }
  }
}

TEST_CASE("operator derivatives match finite differences") {
  const auto inst = oracle::random_instance(7);
  const OpacityProblem& pr = inst.problem;
  const auto ops = build_operators(pr.mdp, inst.policy, pr.observation, 2);
  const Index d = ops.num_parameters();
  auto op_at = [&](const Vec& th, Index o) {
    SoftmaxPolicy p(pr.mdp.num_states(), pr.mdp.num_actions(), th);
    return build_operators(pr.mdp, p, pr.observation, 0).op(o);
  };
  const double h = 1e-6;
  for (Index k = 0; k < d; ++k) {
    Vec plus = inst.policy.theta(), minus = plus;
    plus(k) += h;
    minus(k) -= h;
    for (Index o = 0; o < ops.num_observations(); ++o) {
      const Mat fd = (op_at(plus, o) - op_at(minus, o)) / (2 * h);
      CHECK((ops.op_derivative(o, k) - fd).norm() < 1e-8);
      for (Index l = 0; l < d; ++l) {
        CHECK((ops.op_second_derivative(o, k, l) - ops.op_second_derivative(o, l, k)).norm() < 1e-14);
      }
    }
  }
}

TEST_CASE("gradient and Hessian of P(y) match finite differences") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const OpacityProblem& pr = inst.problem;
    const Index n = pr.mdp.num_states(), m = pr.mdp.num_actions();
    const auto ops = build_operators(pr.mdp, inst.policy, pr.observation, 2);
    const auto seqs = enumerate_sequences(ops, pr.mdp.initial, pr.horizon);
    for (std::size_t i = 0; i < seqs.size(); i += std::max<std::size_t>(1, seqs.size() / 5)) {
      const auto& y = seqs[i];
      const auto msg = differentiated_messages(ops, pr.mdp.initial, y, 2);
      auto prob = [&](const Vec& th) {
        const auto o = build_operators(pr.mdp, SoftmaxPolicy(n, m, th), pr.observation, 0);
        return oracle::scalar(observation_probability(o, pr.mdp.initial, y));
      };
      auto grad = [&](const Vec& th) {
        const auto o = build_operators(pr.mdp, SoftmaxPolicy(n, m, th), pr.observation, 1);
        return Vec(forward_messages(o, pr.mdp.initial, y, 1).gradient());
      };
      CHECK(oracle::relative_error(msg.gradient().transpose(), oracle::jacobian(prob, inst.policy.theta())) < 1e-5);
      const Mat hess = msg.hessian();
      CHECK(oracle::relative_error(hess, oracle::jacobian(grad, inst.policy.theta())) < 1e-4);
      CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(oracle::relative_error(msg.gradient(), gradient_by_operator_products(ops, pr.mdp.initial, y)) < 1e-10);
      for (Index s0 = 0; s0 < n; ++s0) {
        auto given = [&](const Vec& th) {
          const auto o = build_operators(pr.mdp, SoftmaxPolicy(n, m, th), pr.observation, 0);
          return oracle::scalar(probability_given_initial(o, y, s0));
        };
        CHECK(oracle::relative_error(msg.gradient_given_initial(s0).transpose(),
                                     oracle::jacobian(given, inst.policy.theta())) < 1e-5);
      }
    }
  }
}

TEST_CASE("terminal posterior refuses impossible sequences") {
  Mat chain = Mat::Identity(2, 2);
  Mat emission(2, 2);
  emission << 1, 0, 0, 1;
  ObservableOperators<double> ops(chain, emission);
  Vec mu0(2);
  mu0 << 1.0, 0.0;
  CHECK(observation_probability(ops, mu0, ObservationSequence{1, 1}) == 0.0);
  CHECK_THROWS_AS(terminal_posterior(ops, mu0, ObservationSequence{1, 1}), UndefinedPosterior);
  CHECK_THROWS_AS(observation_probability(ops, mu0, ObservationSequence{2}), InputError);
  CHECK_THROWS_AS(observation_probability(ops, mu0, ObservationSequence{}), InputError);
}

TEST_CASE("operators can be evaluated with a non-double scalar") {
  const auto inst = oracle::random_instance(4);
  const auto ops = build_operators(inst.problem.mdp, inst.policy, inst.problem.observation, 0);
  ObservableOperators<long double> wide(ops.chain().cast<long double>(), ops.emission().cast<long double>());
  const ObservationSequence y(inst.problem.horizon + 1, 0);
  const long double p = observation_probability(wide, inst.problem.mdp.initial.cast<long double>(), y);
  CHECK(std::abs(static_cast<double>(p) - observation_probability(ops, inst.problem.mdp.initial, y)) < 1e-14);
}
