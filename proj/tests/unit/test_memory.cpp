#include <doctest.h>

#include "opaque/memory.hpp"
#include "opaque/opacity.hpp"
#include "oracles.hpp"

using namespace opaque;

namespace {

// Policy on the augmented MDP that ignores memory.
SoftmaxPolicy memoryless(const AugmentedMdp& aug, const SoftmaxPolicy& base) {
  SoftmaxPolicy p(aug.mdp.num_states(), aug.mdp.num_actions());
  Vec theta(p.num_parameters());
  for (Index i = 0; i < aug.mdp.num_states(); ++i) {
    for (Index a = 0; a < aug.mdp.num_actions(); ++a) theta(p.parameter_index(i, a)) = base.logit(aug.base_state[i], a);
  }
  p.set_theta(theta);
  return p;
}

}  // namespace

TEST_CASE("memory that the policy ignores changes nothing") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const OpacityProblem& pr = inst.problem;
    const auto counter = MemoryTransducer::time_counter(3, pr.mdp.num_states(), pr.mdp.num_actions());
    const AugmentedMdp aug = augment_with_memory(pr.mdp, counter);
    aug.mdp.validate();
    const OpacityProblem lifted{aug.mdp, aug.lift(pr.observation), aug.lift(pr.secret), pr.horizon};
    const SoftmaxPolicy p = memoryless(aug, inst.policy);
    CHECK(std::abs(exact_conditional_entropy(lifted, p).entropy -
                   exact_conditional_entropy(pr, inst.policy).entropy) < 1e-12);
    CHECK(finite_horizon_value(aug.mdp, p, pr.horizon) ==
          doctest::Approx(finite_horizon_value(pr.mdp, inst.policy, pr.horizon)).epsilon(1e-12));
  }
}

TEST_CASE("time counter saturates") {
  const auto counter = MemoryTransducer::time_counter(3, 2, 1);
  CHECK(counter.initial(1)(0) == 1.0);
  CHECK(counter.update(0, 0, 0, 1)(1) == 1.0);
  CHECK(counter.update(1, 1, 0, 0)(2) == 1.0);
  CHECK(counter.update(2, 1, 0, 1)(2) == 1.0);
}

TEST_CASE("stochastic memory updates keep the augmented chain stochastic") {
  const auto inst = oracle::random_instance(3);
  const Index n = inst.problem.mdp.num_states(), m = inst.problem.mdp.num_actions();
  const auto tr = MemoryTransducer::from_action_update(
      {"m0", "m1"}, n, m,
      [](Index mem, Index s, Index a) {
        Vec d(2);
        d(0) = 0.3 + 0.1 * ((mem + s + a) % 3);
        d(1) = 1.0 - d(0);
        return d;
      },
      [](Index) { return Vec::Constant(2, 0.5); });
  const AugmentedMdp aug = augment_with_memory(inst.problem.mdp, tr);
  CHECK_NOTHROW(aug.mdp.validate());
  CHECK(aug.mdp.num_states() == 2 * n);
  CHECK_THROWS_AS(augment_with_memory(inst.problem.mdp, tr, n), ModelError);
}

TEST_CASE("state-driven memory starts from delta(m0, s0)") {
  const auto tr = MemoryTransducer::from_state_update(
      {"clean", "seen"}, 3, 2, [](Index mem, Index s_next) { return s_next == 1 ? Index{1} : mem; }, 0);
  CHECK(tr.initial(0)(0) == 1.0);
  CHECK(tr.initial(1)(1) == 1.0);
  CHECK(tr.update(0, 0, 1, 1)(1) == 1.0);
  CHECK(tr.update(1, 1, 0, 2)(1) == 1.0);
}
