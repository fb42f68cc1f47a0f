#include <doctest.h>

#include <set>

#include "rwalk/kernel.hpp"
#include "rwalk/reduction.hpp"
#include "rwalk/stationary.hpp"
#include "testutil.hpp"

using namespace rwalk;
namespace tu = rwalk::testutil;

TEST_CASE("birth-death kernel is valid") {
  auto report = validate_kernel(tu::birth_death());
  CHECK(report.valid());
}

TEST_CASE("negative move off the empty face is flagged") {
  TransitionKernel k;
  k.dimension = 1;
  k.rules[0] = {Rule{{-1}, Rat(1)}};
  auto report = validate_kernel(k);
  REQUIRE_FALSE(report.valid());
  CHECK(report.violations.front().message.find("negative move off face") != std::string::npos);
}

TEST_CASE("face mass must sum to one") {
  TransitionKernel k;
  k.dimension = 2;
  k.rules[0b01] = {Rule{{-1, 0}, Rat(1, 2)}, Rule{{0, 0}, Rat(1, 4)}};
  auto report = validate_kernel(k);
  REQUIRE_FALSE(report.valid());
  CHECK(report.violations.front().message.find("face mass 3/4 != 1") != std::string::npos);
}

TEST_CASE("step size bounds respect lenient coordinates") {
  TransitionKernel k;
  k.dimension = 2;
  k.rules[0b11] = {Rule{{-1, +2}, Rat(1)}};
  CHECK_FALSE(validate_kernel(k).valid());
  k.lenient_steps.insert(1);
  CHECK(validate_kernel(k).valid());
}

TEST_CASE("step distribution on the birth-death kernel") {
  auto k = tu::birth_death();
  auto down = step_distribution(k, {3});
  REQUIRE(down.size() == 1);
  CHECK(down[0].first == WalkState{2});
  CHECK(down[0].second == Rat(1));
  auto up = step_distribution(k, {0});
  REQUIRE(up.size() == 1);
  CHECK(up[0].first == WalkState{1});
}

TEST_CASE("compiled walk branches in two at the origin") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  auto succ = step_distribution(walk.kernel, origin_state(walk.kernel.dimension));
  REQUIRE(succ.size() == 2);
  CHECK(succ[0].second == Rat(1, 2));
  CHECK(succ[1].second == Rat(1, 2));
}

TEST_CASE("dead face raises an error") {
  TransitionKernel k;
  k.dimension = 1;
  k.rules[0] = {Rule{{+1}, Rat(1)}};
  CHECK_THROWS_WITH_AS(step_distribution(k, {1}), doctest::Contains("dead face"),
                       std::runtime_error);
}

TEST_CASE("masses sum to one on every face after a step") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto k = tu::random_finite_kernel(seed);
    REQUIRE(validate_kernel(k).valid());
    for (const auto& state : {WalkState{0, 0}, WalkState{1, 0}, WalkState{0, 2}, WalkState{3, 1}}) {
      Rat total(0);
      for (const auto& [next, prob] : step_distribution(k, state)) total += prob;
      CHECK(total == Rat(1));
    }
  }
}

TEST_CASE("coordinates leave the face exactly when driven to zero") {
  auto k = tu::random_finite_kernel(7);
  for (const auto& state : {WalkState{1, 1}, WalkState{2, 1}, WalkState{1, 3}}) {
    for (const auto& [next, prob] : step_distribution(k, state)) {
      FaceMask nf = face_of(next);
      for (int i = 0; i < k.dimension; ++i)
        CHECK(face_has(nf, i) == (next[static_cast<std::size_t>(i)] > 0));
    }
  }
}

TEST_CASE("simulation is reproducible and deterministic kernels ignore the seed") {
  auto k = tu::birth_death();
  auto a = simulate(k, {5}, 9, 1);
  auto b = simulate(k, {5}, 9, 99);
  CHECK(a.states == b.states);
  WalkState expect{5};
  for (std::size_t t = 0; t < 6; ++t) CHECK(a.states[t] == WalkState{5 - static_cast<long long>(t)});

  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  auto t1 = simulate(walk.kernel, origin_state(walk.kernel.dimension), 64, 42);
  auto t2 = simulate(walk.kernel, origin_state(walk.kernel.dimension), 64, 42);
  CHECK(t1.states == t2.states);
}

TEST_CASE("compiled non-halting walk returns to the origin at an even step") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  WalkState origin = origin_state(walk.kernel.dimension);
  auto traj = simulate(walk.kernel, origin, 200, 7);
  long long first_return = -1;
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    if (traj.states[t] == origin) {
      first_return = static_cast<long long>(t);
      break;
    }
  }
  REQUIRE(first_return >= 2);
  CHECK(first_return % 2 == 0);
}

TEST_CASE("split_pm2 preserves the norm process in distribution") {
  auto walk = compile_extended(tu::halting_two_step_machine(), Rat(1, 2), false);
  int q1 = walk.layout.q1();
  auto split = split_pm2(walk.kernel, q1);
  CHECK(validate_kernel(split).valid());
  for (int c : split.lenient_steps) CHECK(c != q1);

  auto base = stationary::propagate(walk.kernel, origin_state(walk.kernel.dimension), 12);
  auto twin = stationary::propagate(split, origin_state(split.dimension), 12);
  for (std::size_t t = 0; t < base.size(); ++t) {
    std::map<long long, Rat> lhs, rhs;
    for (const auto& [q, m] : base[t].mass) lhs[l1_norm(q)] += m;
    for (const auto& [q, m] : twin[t].mass) rhs[l1_norm(q)] += m;
    CHECK(lhs == rhs);
  }
}

TEST_CASE("split_pm2 rejects downward double steps") {
  TransitionKernel k;
  k.dimension = 1;
  k.lenient_steps.insert(0);
  k.rules[0] = {Rule{{+2}, Rat(1)}};
  k.rules[1] = {Rule{{-2}, Rat(1)}};
  CHECK_THROWS_WITH_AS(split_pm2(k, 0), doctest::Contains("-2"), std::invalid_argument);
}

TEST_CASE("kernel files round-trip bit-exactly and reject decimals") {
  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), true);
  std::string text = serialize_kernel(walk.kernel);
  auto reloaded = parse_kernel(text, "mem");
  CHECK(serialize_kernel(reloaded) == text);
  REQUIRE(reloaded.meta != nullptr);
  CHECK(reloaded.meta->p == Rat(1, 2));
  CHECK(reloaded.meta->layout.with_q3);

  CHECK_THROWS_WITH_AS(
      parse_kernel(R"({"dimension":1,"rules":[{"face":[1],"delta":[-1],"prob":"0.5"}]})", "mem"),
      doctest::Contains("prob"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      parse_kernel(R"({"dimension":1,"rules":[{"face":[2],"delta":[-1],"prob":"1/2"}]})", "mem"),
      doctest::Contains("face"), std::runtime_error);
}
