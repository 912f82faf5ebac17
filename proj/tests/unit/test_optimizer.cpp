#include <doctest.h>

#include <sstream>

#include "opaque/envlib.hpp"
#include "opaque/optimizer.hpp"
#include "oracles.hpp"

using namespace opaque;

TEST_CASE("step schedule") {
  const auto s = schedule(4, 0.75);
  CHECK(s.eta == doctest::Approx(std::pow(4.0, -0.75)));
  CHECK(s.kappa == doctest::Approx(0.25));
  CHECK_THROWS_AS(schedule(0, 0.6), InputError);
  CHECK_THROWS_AS(schedule(1, 0.4), InputError);
  CHECK_THROWS_AS(schedule(1, 1.0), InputError);
}

TEST_CASE("single step clips theta and lambda") {
  PrimalDualConfig config;
  config.zeta = 1.0;
  config.lambda_max = 2.0;
  config.theta_max = 5.0;
  config.theta_min = -5.0;
  Vec theta = Vec::Zero(3);
  Vec gh = Vec::Constant(3, 100.0);
  Vec gv = Vec::Zero(3);
  auto next = primal_dual_step(theta, 0.0, gh, gv, -10.0, config, 1);
  CHECK(next.theta.maxCoeff() == 5.0);
  CHECK(next.lambda == 2.0);
  next = primal_dual_step(theta, 1.0, -gh, gv, 50.0, config, 1);
  CHECK(next.theta.minCoeff() == -5.0);
  CHECK(next.lambda == 0.0);
  // Interior update follows the formula exactly.
  next = primal_dual_step(theta, 0.5, Vec::Constant(3, 0.1), Vec::Constant(3, 0.2), 0.9, config, 2);
  CHECK(next.theta(0) == doctest::Approx(std::pow(2.0, -0.6) * (0.1 + 0.5 * 0.2)));
  CHECK(next.lambda == doctest::Approx(0.5 - 0.5 * (0.9 - 1.0)));
  gh(1) = std::nan("");
  CHECK_THROWS_AS(primal_dual_step(theta, 0.0, gh, gv, 0.0, config, 1), NumericalError);
}

TEST_CASE("config validation") {
  PrimalDualConfig config;
  CHECK_NOTHROW(config.validate());
  config.xi = 0.5;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = {};
  config.lambda_init = -1.0;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = {};
  config.samples = 0;
  CHECK_THROWS_AS(config.validate(), InputError);
}

TEST_CASE("primal-dual iterates stay in their boxes and are reproducible") {
  const auto inst = oracle::random_instance(8);
  PrimalDualConfig config;
  config.iterations = 60;
  config.samples = 200;
  config.seed = 77;
  config.zeta = 0.5 * optimal_finite_horizon_value(inst.problem.mdp, inst.problem.horizon);
  config.lambda_max = 3.0;
  config.theta_min = -2.0;
  config.theta_max = 2.0;
  const auto a = run_primal_dual(inst.problem, config);
  const auto b = run_primal_dual(inst.problem, config);
  std::ostringstream ca, cb;
  a.write_csv(ca);
  b.write_csv(cb);
  CHECK(ca.str() == cb.str());
  CHECK(a.final_theta == b.final_theta);
  for (const auto& r : a.records) {
    CHECK(r.lambda >= 0.0);
    CHECK(r.lambda <= config.lambda_max);
  }
  CHECK(a.final_theta.maxCoeff() <= 2.0);
  CHECK(a.final_theta.minCoeff() >= -2.0);
  CHECK(a.records.size() == 60);
  CHECK(a.initial_theta == initial_theta(a.initial_theta.size(), 77, config));
}

TEST_CASE("unconstrained run keeps lambda at zero") {
  const auto inst = oracle::random_instance(9);
  PrimalDualConfig config;
  config.iterations = 30;
  config.mode = EstimationMode::exact;
  config.lambda_init = 5.0;
  const auto log = run_primal_dual(inst.problem, config);
  CHECK(log.final_lambda == 0.0);
  CHECK_FALSE(log.infeasible);
}

TEST_CASE("exact mode ascends entropy on the three-state example") {
  const auto ex = example_finite_memory();
  PrimalDualConfig config;
  config.iterations = 200;
  config.mode = EstimationMode::exact;
  const auto log = run_primal_dual(ex.problem(), config);
  CHECK(log.records.back().entropy > log.records.front().entropy);
  CHECK(log.records.back().entropy < 0.5);
}

TEST_CASE("infeasibility heuristic") {
  PrimalDualConfig config;
  config.zeta = 1.0;
  config.lambda_max = 10.0;
  std::vector<IterateRecord> records(20);
  for (auto& r : records) {
    r.value = 0.2;
    r.lambda = 10.0;
  }
  CHECK(looks_infeasible(records, config));
  records.back().value = 1.5;
  CHECK_FALSE(looks_infeasible(records, config));
  records.back().value = 0.2;
  records.back().lambda = 9.0;
  CHECK_FALSE(looks_infeasible(records, config));
  config.zeta = -std::numeric_limits<double>::infinity();
  CHECK_FALSE(looks_infeasible(records, config));
}
