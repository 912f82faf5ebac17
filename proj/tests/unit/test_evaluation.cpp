#include <doctest.h>

#include "opaque/envlib.hpp"
#include "opaque/evaluation.hpp"
#include "opaque/sampling.hpp"
#include "oracles.hpp"

using namespace opaque;

TEST_CASE("map estimate breaks ties toward the smaller index") {
  Vec p(3);
  p << 0.4, 0.4, 0.2;
  CHECK(map_estimate(p) == 0);
  p << 0.1, 0.45, 0.45;
  CHECK(map_estimate(p) == 1);
}

TEST_CASE("guess error on the three-state example") {
  const auto r = example_finite_memory_policy();
  // Only NNN is ambiguous: P = 0.5, posterior 1/2.
  CHECK(guess_error_exact(r.problem, r.policy).error == doctest::Approx(0.25).epsilon(1e-12));
  const auto s = guess_error_sampled(r.problem, r.policy, 40000, 1);
  CHECK(std::abs(s.error - 0.25) < 5 * s.standard_error);
}

TEST_CASE("guess error is bounded by one minus the largest prior label mass") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const auto joint = oracle::brute_force_joint(inst.problem, inst.policy.probabilities());
    const double pe = guess_error_exact(inst.problem, inst.policy).error;
    CHECK(pe >= -1e-15);
    CHECK(pe <= 1.0 - joint.secret.colwise().sum().maxCoeff() + 1e-12);
  }
}

TEST_CASE("regularized objective is return plus weighted policy entropy") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const Mdp& mdp = inst.problem.mdp;
    const int T = inst.problem.horizon;
    // Oracle: fold tau * H(pi(.|s)) into the reward and enumerate paths.
    Mdp shaped = mdp;
    const Mat pi = inst.policy.probabilities();
    for (Index s = 0; s < mdp.num_states(); ++s) {
      double h = 0.0;
      for (Index a = 0; a < mdp.num_actions(); ++a) h -= oracle::plogp(pi(s, a));
      shaped.reward.row(s).array() += 2.5 * h;
    }
    CHECK(regularized_objective(mdp, inst.policy, T, 2.5) ==
          doctest::Approx(oracle::brute_force_value(shaped, pi, T)).epsilon(1e-12));
  }
}

TEST_CASE("regularized gradient estimate is unbiased") {
  const auto inst = oracle::random_instance(6);
  const Mdp& mdp = inst.problem.mdp;
  const int T = inst.problem.horizon;
  const double tau = 1.5;
  const auto batch = sample_batch(mdp, inst.policy, nullptr, T, 200000, 5);
  const Vec g = regularized_gradient(mdp, inst.policy, batch, tau);
  const Mat fd = oracle::jacobian(
      [&](const Vec& th) {
        return oracle::scalar(regularized_objective(mdp, SoftmaxPolicy(mdp.num_states(), mdp.num_actions(), th), T, tau));
      },
      inst.policy.theta());
  CHECK(oracle::relative_error(g.transpose(), fd) < 0.05);
}

TEST_CASE("large tau drives the baseline toward the uniform policy") {
  const auto inst = oracle::random_instance(2);
  BaselineConfig config;
  config.tau = 50.0;
  config.horizon = inst.problem.horizon;
  config.iterations = 300;
  config.samples = 500;
  const SoftmaxPolicy p = entropy_regularized_solve(inst.problem.mdp, config);
  const Mat pi = p.probabilities();
  CHECK((pi.array() - 1.0 / pi.cols()).abs().maxCoeff() < 0.1);
}
