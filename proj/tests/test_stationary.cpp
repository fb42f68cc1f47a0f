#include <doctest.h>

#include <cmath>

#include "rwalk/lyapunov.hpp"
#include "rwalk/reduction.hpp"
#include "rwalk/stationary.hpp"
#include "testutil.hpp"

using namespace rwalk;
using namespace rwalk::stationary;
namespace tu = rwalk::testutil;

TEST_CASE("propagation conserves mass exactly") {
  auto k = tu::birth_death();
  auto dists = propagate(k, {0}, 6);
  CHECK(dists[2].mass.at({0}) == Rat(1));  // forced 0 -> 1 -> 0 cycle
  for (const auto& d : dists) {
    Rat total = d.leaked;
    for (const auto& [state, mass] : d.mass) total += mass;
    CHECK(total == Rat(1));
  }

  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  auto wd = propagate(walk.kernel, origin_state(walk.kernel.dimension), 8);
  CHECK(wd[2].mass.at(origin_state(walk.kernel.dimension)) == Rat(1, 2));
  for (const auto& d : wd) {
    Rat total(0);
    for (const auto& [state, mass] : d.mass) total += mass;
    CHECK(total == Rat(1));
  }
}

TEST_CASE("float propagation tracks leaked mass") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  auto dists = propagate_float(walk.kernel, origin_state(walk.kernel.dimension), 40, 1e-6);
  const auto& last = dists.back();
  double total = last.leaked;
  for (const auto& [state, mass] : last.mass) total += mass;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(last.leaked > 0.0);
}

TEST_CASE("propagation stops at the state cap with a diagnostic") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  PropagateOptions opts;
  opts.state_cap = 3;
  CHECK_THROWS_WITH_AS(propagate(walk.kernel, origin_state(walk.kernel.dimension), 30, opts),
                       doctest::Contains("state cap"), std::runtime_error);
}

TEST_CASE("return time on the birth-death kernel") {
  auto report = return_time(tu::birth_death(), {0}, 10, ReturnMode::Exact);
  REQUIRE(report.mean_exact.has_value());
  CHECK(*report.mean_exact == Rat(2));
  CHECK(*report.pi_estimate == Rat(1, 2));
  CHECK(report.tail_mass == Rat(0));
}

TEST_CASE("return time closes the geometric tail of compiled walks analytically") {
  for (Rat p : {Rat(1, 4), Rat(1, 2), Rat(3, 4)}) {
    auto walk = compile_extended(tu::non_halting_machine(), p, false);
    auto report =
        return_time(walk.kernel, origin_state(walk.kernel.dimension), 30, ReturnMode::Exact);
    REQUIRE(report.mean_exact.has_value());
    CHECK(report.analytic_tail);
    CHECK(*report.mean_exact == Rat(2) / (Rat(1) - p));
    CHECK(*report.pi_estimate == (Rat(1) - p) / Rat(2));
    CHECK(report.tail_mass > Rat(0));
  }
}

TEST_CASE("return time of the halting walk needs no tail") {
  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), false);
  auto report =
      return_time(walk.kernel, origin_state(walk.kernel.dimension), 40, ReturnMode::Exact);
  REQUIRE(report.mean_exact.has_value());
  CHECK_FALSE(report.analytic_tail);
  CHECK(*report.mean_exact == Rat(7, 2));
  CHECK(*report.pi_estimate == Rat(2, 7));
}

TEST_CASE("exact stationary masses on finite classes") {
  auto bd = solve_stationary_exact(tu::birth_death(), {0});
  CHECK(bd.pi.at({0}) == Rat(1, 2));
  CHECK(bd.pi.at({1}) == Rat(1, 2));

  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), false);
  auto sol = solve_stationary_exact(walk.kernel, origin_state(walk.kernel.dimension));
  CHECK(sol.pi.at(origin_state(walk.kernel.dimension)) == Rat(2, 7));

  auto quarter = compile_extended(tu::halting_two_step_machine(), Rat(1, 4), false);
  auto sol4 = solve_stationary_exact(quarter.kernel, origin_state(quarter.kernel.dimension));
  CHECK(sol4.pi.at(origin_state(quarter.kernel.dimension)) == Rat(24, 63));
  Rat p(1, 4);
  CHECK(sol4.pi.at(origin_state(quarter.kernel.dimension)) ==
        (Rat(1) - p) / (Rat(2) - Rat(2) * rat_pow(p, 3)));
}

TEST_CASE("infinite classes are rejected with guidance") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  CHECK_THROWS_WITH_AS(
      solve_stationary_exact(walk.kernel, origin_state(walk.kernel.dimension), 500),
      doctest::Contains("Monte Carlo"), std::runtime_error);
}

TEST_CASE("Kac identity holds exactly on random finite kernels") {
  for (std::uint64_t seed : {11ULL, 22ULL, 33ULL, 44ULL, 55ULL}) {
    auto k = tu::random_finite_kernel(seed);
    REQUIRE(validate_kernel(k).valid());
    auto sol = solve_stationary_exact(k, {0, 0});
    auto report = return_time(k, {0, 0}, 64, ReturnMode::Exact);
    REQUIRE(report.mean_exact.has_value());
    CHECK(report.mean_via_class_solve);
    CHECK(sol.pi.at({0, 0}) * *report.mean_exact == Rat(1));
  }
}

TEST_CASE("Kac identity ties the halting walk's two exact routes together") {
  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 3), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  auto sol = solve_stationary_exact(walk.kernel, origin);
  auto report = return_time(walk.kernel, origin, 40, ReturnMode::Exact);
  REQUIRE(report.mean_exact.has_value());
  CHECK(sol.pi.at(origin) * *report.mean_exact == Rat(1));
}

TEST_CASE("Monte Carlo return times are reproducible and close to truth") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  auto a = return_time(walk.kernel, origin, 100000, ReturnMode::MonteCarlo, 20000, 7);
  auto b = return_time(walk.kernel, origin, 100000, ReturnMode::MonteCarlo, 20000, 7);
  REQUIRE(a.mc_mean.has_value());
  CHECK(*a.mc_mean == *b.mc_mean);  // identical seed, identical result
  CHECK(std::abs(*a.mc_mean - 4.0) < 5.0 * *a.mc_stderr + 1e-9);
}

TEST_CASE("Monte Carlo means land within four standard errors almost always") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  int hits = 0;
  const int trials = 100;
  for (int s = 1; s <= trials; ++s) {
    auto report = return_time(walk.kernel, origin, 100000, ReturnMode::MonteCarlo, 10000,
                              static_cast<std::uint64_t>(s));
    if (std::abs(*report.mc_mean - 4.0) < 4.0 * *report.mc_stderr) ++hits;
  }
  CHECK(hits >= 99);
}

TEST_CASE("two-sided approximation brackets the exact stationary mass") {
  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  auto cert = lyapunov::geometric_from_linear(walk.kernel, walk.lyapunov.w, Rat(1));

  ApproxOptions opts;
  opts.epsilon = 1e-3;
  auto res = approx_stationary(walk.kernel, cert, origin, origin, opts);
  CHECK_FALSE(res.certified);
  CHECK(res.period == 2);
  double truth = 2.0 / 7.0;
  CHECK(res.lower <= truth);
  CHECK(truth <= res.upper);

  opts.epsilon = 2.0;  // trivially valid interval, clamped at zero
  auto wide = approx_stationary(walk.kernel, cert, origin, origin, opts);
  CHECK(wide.lower == 0.0);
  CHECK(wide.upper >= 1.0);
}

TEST_CASE("heuristic approximation works on the infinite-class walk") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  auto cert = lyapunov::geometric_from_linear(walk.kernel, walk.lyapunov.w, Rat(1));
  ApproxOptions opts;
  opts.epsilon = 1e-4;
  opts.class_cap = 2000;
  auto res = approx_stationary(walk.kernel, cert, origin, origin, opts);
  CHECK_FALSE(res.certified);
  CHECK(res.lower <= 0.25);
  CHECK(0.25 <= res.upper);
}

TEST_CASE("conditional cycles: enumerated truth and carried reference formulas") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), true);
  auto report = conditional_cycles(walk.kernel, 3);
  Rat p(1, 2);

  // enumerated truth of this construction
  CHECK(report.prob_In == rat_pow(p, 2));  // the drain passes q3 = 3 iff t >= 2
  CHECK(report.e_len == Rat(3) / (Rat(1) - p));
  REQUIRE(report.e_len_given_In.has_value());
  CHECK(*report.e_len_given_In == Rat(12));
  REQUIRE(report.e_len_given_not_In.has_value());
  CHECK(*report.e_len_given_not_In == Rat(4));
  CHECK(report.pi_ray_state == Rat(1, 24));

  // reference formulas carried from the construction's source text
  CHECK(report.ref_prob_In == Rat(1, 8));
  CHECK(report.ref_e_given_In == Rat(7, 2));
  CHECK(*report.ref_e_given_not_In == Rat(57, 14));
  CHECK(*report.ref_pi_ray_state == Rat(14, 505));
  CHECK_FALSE(report.matches_reference);  // documented divergence, see notes

  auto trivial = conditional_cycles(walk.kernel, 0);
  CHECK(trivial.prob_In == Rat(1));
  CHECK_FALSE(trivial.e_len_given_not_In.has_value());

  auto halting = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), true);
  CHECK_THROWS_WITH_AS(conditional_cycles(halting.kernel, 3), doctest::Contains("halts"),
                       std::runtime_error);
}

TEST_CASE("ray decay of the non-halting walk matches the geometric law") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), true);
  std::vector<long long> v(static_cast<std::size_t>(walk.kernel.dimension), 0);
  v[static_cast<std::size_t>(walk.layout.q3())] = 1;
  LdrOptions opts;
  opts.n_max = 12;
  opts.class_cap = 3000;
  auto report = ldrate(walk.kernel, v, opts);
  CHECK_FALSE(report.infinite_rate);
  Rat p(1, 2);
  double logp = std::log(0.5);
  for (const auto& point : report.points) {
    CHECK(point.pi == rat_pow(p, static_cast<unsigned long long>(point.n - 1)) * (Rat(1) - p) /
                          Rat(3));
    CHECK(std::abs(point.log_pi_over_n - logp) <= 1.2 / static_cast<double>(point.n));
  }
  REQUIRE(report.slope_estimate.has_value());
  CHECK(*report.slope_estimate == doctest::Approx(logp).epsilon(1e-9));
}

TEST_CASE("ray decay of the halting walk is flagged infinite") {
  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), true);
  std::vector<long long> v(static_cast<std::size_t>(walk.kernel.dimension), 0);
  v[static_cast<std::size_t>(walk.layout.q3())] = 1;
  LdrOptions opts;
  opts.n_max = 8;
  auto report = ldrate(walk.kernel, v, opts);
  CHECK(report.infinite_rate);
  CHECK(report.zero_from_n == 4);
  CHECK(report.points[0].pi > Rat(0));
  CHECK(report.points[2].pi > Rat(0));
  CHECK(report.points[3].pi == Rat(0));
}
