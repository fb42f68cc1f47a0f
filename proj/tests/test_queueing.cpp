#include <doctest.h>

#include "rwalk/queueing.hpp"
#include "rwalk/stationary.hpp"

using namespace rwalk;
using namespace rwalk::queueing;

namespace {

QueueSystem single_type(int visits, int slot, Rat p) {
  QueueSystem s;
  s.types = 1;
  s.visits = {visits};
  s.slot = slot;
  s.arrival_probs = {p};
  return s;
}

}  // namespace

TEST_CASE("load factor is exact") {
  auto a = load_factor(single_type(1, 2, Rat(1, 2)));
  CHECK(a.rho == Rat(1, 4));
  CHECK(a.stable_necessary);

  QueueSystem b;
  b.types = 2;
  b.visits = {2, 3};
  b.slot = 1;
  b.arrival_probs = {Rat(1, 2), Rat(1, 5)};
  auto rb = load_factor(b);
  CHECK(rb.rho == Rat(8, 5));
  CHECK_FALSE(rb.stable_necessary);

  auto c = load_factor(single_type(3, 4, Rat(0)));
  CHECK(c.rho == Rat(0));
}

TEST_CASE("unit steps serve, route, and respect idling") {
  auto sys = single_type(1, 1, Rat(1, 2));
  auto policy = PriorityPolicy::from_priority_order(1, {1});
  QueueState st;
  st.buffers = {1};
  auto next = queue_step(sys, policy, st, {false});
  CHECK(next.buffers == std::vector<long long>{0});

  auto idle = PriorityPolicy::from_table(1, {0, 0});
  QueueState grow;
  grow.buffers = {0};
  for (int t = 0; t < 5; ++t) grow = queue_step(sys, idle, grow, {true});
  CHECK(grow.buffers == std::vector<long long>{5});

  auto two = single_type(2, 1, Rat(1, 2));
  auto p2 = PriorityPolicy::from_priority_order(2, {1, 2});
  QueueState routed;
  routed.buffers = {1, 0};
  auto after = queue_step(two, p2, routed, {false});
  CHECK(after.buffers == std::vector<long long>{0, 1});
}

TEST_CASE("policy consistency is enforced over every occupancy pattern") {
  CHECK_THROWS_WITH_AS(PriorityPolicy::from_table(2, {0, 1, 1, 1}),
                       doctest::Contains("inconsistent"), std::invalid_argument);
  auto theta = PriorityPolicy::from_priority_order(3, {2, 1, 3});
  // explicit tabulation of the same priority rule
  std::vector<int> table(8, 0);
  for (std::uint32_t b = 1; b < 8; ++b) {
    if ((b >> 1) & 1U) table[b] = 2;
    else if (b & 1U) table[b] = 1;
    else table[b] = 3;
  }
  auto direct = PriorityPolicy::from_table(3, table);
  for (std::uint32_t b = 0; b < 8; ++b) CHECK(theta.serve(b) == direct.serve(b));
}

TEST_CASE("embedded chain: an arriving part is served within the block") {
  auto sys = single_type(1, 2, Rat(1, 2));
  auto policy = PriorityPolicy::from_priority_order(1, {1});
  auto chain = embedded_chain(sys, policy);
  auto succ = chain.successors({0});
  REQUIRE(succ.size() == 1);
  CHECK(succ[0].first == WalkState{0});
  CHECK(succ[0].second == Rat(1));

  auto sol = stationary::solve_stationary_exact(chain, {0});
  CHECK(sol.pi.at({0}) == Rat(1));
}

TEST_CASE("embedded chain with zero arrivals pins the empty state") {
  auto sys = single_type(1, 1, Rat(0));
  auto policy = PriorityPolicy::from_priority_order(1, {1});
  auto sol = stationary::solve_stationary_exact(embedded_chain(sys, policy), {0});
  CHECK(sol.class_size == 1);
  CHECK(sol.pi.at({0}) == Rat(1));
}

TEST_CASE("intra-slot convention: arrivals land before the same slot's service") {
  auto sys = single_type(1, 1, Rat(1, 2));
  auto policy = PriorityPolicy::from_priority_order(1, {1});
  auto chain = embedded_chain(sys, policy);
  auto succ = chain.successors({0});
  REQUIRE(succ.size() == 1);  // arrival (if any) is served in the same slot
  CHECK(succ[0].first == WalkState{0});
}

TEST_CASE("simulation matches the embedded chain on epoch statistics") {
  auto sys = single_type(1, 2, Rat(1, 2));
  auto policy = PriorityPolicy::from_priority_order(1, {1});
  auto stats = queue_simulate(sys, policy, 200000, 11);
  CHECK(stats.empty_epoch_fraction == 1.0);  // exact value from the epoch chain
  CHECK(stats.total_departures <= stats.total_arrivals);
  CHECK(stats.mean_occupancy[0] == 0.0);
}

TEST_CASE("idling policies only accumulate work") {
  auto sys = single_type(1, 1, Rat(1, 2));
  auto idle = PriorityPolicy::from_table(1, {0, 0});
  auto a = queue_simulate(sys, idle, 2000, 3);
  auto b = queue_simulate(sys, idle, 4000, 3);
  CHECK(a.total_departures == 0);
  CHECK(b.final_buffers[0] > a.final_buffers[0]);
  CHECK(b.mean_occupancy[0] > a.mean_occupancy[0]);
}

TEST_CASE("queue specs round-trip through their file format") {
  QueueSpec spec;
  spec.system = single_type(2, 3, Rat(2, 5));
  spec.policy = PriorityPolicy::from_priority_order(2, {2, 1});
  auto text = serialize_queue_spec(spec);
  auto reloaded = parse_queue_spec(text, "mem");
  CHECK(serialize_queue_spec(reloaded) == text);
  CHECK(reloaded.system.slot == 3);
  CHECK(reloaded.policy.table == spec.policy.table);

  CHECK_THROWS_WITH_AS(
      parse_queue_spec(
          R"({"types":1,"visits":[1],"slot":1,"arrival_probs":[0.5],"policy":{"table":[0,1]}})",
          "mem"),
      doctest::Contains("rational"), std::runtime_error);
}
