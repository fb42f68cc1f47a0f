#include <doctest.h>

#include "rwalk/counter_machine.hpp"
#include "testutil.hpp"

using namespace rwalk;
using namespace rwalk::cm;
namespace tu = rwalk::testutil;

TEST_CASE("single transitions follow the five action cases") {
  auto m = tu::counter_halting_machine();
  Configuration c0{0, 0, 0};
  Configuration c1 = cm_step(m, c0);
  CHECK(c1 == Configuration{1, 1, 0});
  CHECK(cm_step(m, c1) == Configuration{0, 0, 0});

  auto idle = tu::make_machine(2, {{0, 1, 1, 1, 0}});
  CHECK(cm_step(idle, {0, 5, 7}) == Configuration{1, 5, 7});

  auto second = tu::make_machine(2, {{0, 0, 0, 1, 2}, {1, 0, 1, 0, -2}});
  CHECK(cm_step(second, {0, 0, 0}) == Configuration{1, 0, 1});
  CHECK(cm_step(second, {1, 0, 1}) == Configuration{0, 0, 0});
}

TEST_CASE("running detects halting with re-entry semantics") {
  auto m = tu::counter_halting_machine();
  auto result = cm_run(m, {0, 0, 0}, 10);
  REQUIRE(std::holds_alternative<Halted>(result));
  CHECK(std::get<Halted>(result).steps == 2);

  // budget monotonicity
  for (long long budget : {2LL, 3LL, 5LL, 100LL}) {
    auto r = cm_run(m, {0, 0, 0}, budget);
    REQUIRE(std::holds_alternative<Halted>(r));
    CHECK(std::get<Halted>(r).steps == 2);
  }

  auto zero = cm_run(m, {0, 0, 0}, 0);
  REQUIRE(std::holds_alternative<Running>(zero));
  CHECK(std::get<Running>(zero).last == Configuration{0, 0, 0});
}

TEST_CASE("a growing machine keeps running with a large counter") {
  auto m = tu::counter_growing_machine();
  auto result = cm_run(m, {0, 0, 0}, 100);
  REQUIRE(std::holds_alternative<Running>(result));
  const auto& running = std::get<Running>(result);
  CHECK(running.last.state == 1);
  CHECK(running.last.z1 >= 100);
}

TEST_CASE("determinism: repeated runs agree exactly") {
  auto m = tu::zigzag_machine();
  auto a = cm_run(m, {0, 0, 0}, 500);
  auto b = cm_run(m, {0, 0, 0}, 500);
  REQUIRE(std::holds_alternative<Running>(a));
  CHECK(std::get<Running>(a).last == std::get<Running>(b).last);
}

TEST_CASE("stuck configurations raise errors") {
  auto m = tu::make_machine(2, {{0, 0, 0, 1, +1}});  // nothing defined at s1
  CHECK_THROWS_WITH_AS(cm_run(m, {0, 0, 0}, 10), doctest::Contains("stuck"), std::runtime_error);
}

TEST_CASE("counters never go negative") {
  auto m = tu::zigzag_machine();
  Configuration c{0, 0, 0};
  for (int t = 0; t < 200; ++t) {
    c = cm_step(m, c);
    CHECK(c.z1 >= 0);
    CHECK(c.z2 >= 0);
  }
}

TEST_CASE("machine files round-trip and reject unguarded decrements") {
  auto m = tu::zigzag_machine();
  std::string text = serialize_machine(m);
  auto reloaded = parse_machine(text, "mem");
  CHECK(serialize_machine(reloaded) == text);

  CHECK_THROWS_WITH_AS(
      parse_machine(R"({"states":2,
                        "rules":[{"state":"s0","guard":[0,0],"next":"s1","action":-1}],
                        "halting":{"state":"s0","z1":0,"z2":0}})",
                    "mem"),
      doctest::Contains("guard b1=1"), std::runtime_error);
}
