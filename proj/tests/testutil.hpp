#pragma once

#include <vector>

#include "rwalk/counter_machine.hpp"
#include "rwalk/kernel.hpp"
#include "rwalk/rng.hpp"

namespace rwalk::testutil {

// d = 1 kernel cycling 0 <-> 1: down from positive states, up from zero
inline TransitionKernel birth_death() {
  TransitionKernel k;
  k.dimension = 1;
  k.rules[0] = {Rule{{+1}, Rat(1)}};
  k.rules[1] = {Rule{{-1}, Rat(1)}};
  return k;
}

inline cm::CounterMachine make_machine(int states,
                                       const std::vector<std::tuple<int, int, int, int, int>>& rules,
                                       cm::Configuration halting = {0, 0, 0}) {
  cm::CounterMachine m;
  for (int i = 0; i < states; ++i) m.state_names.push_back("s" + std::to_string(i));
  m.gamma.assign(static_cast<std::size_t>(states), {});
  for (auto [s, b1, b2, next, action] : rules)
    m.gamma[static_cast<std::size_t>(s)][(b1 ? 1 : 0) + (b2 ? 2 : 0)] = cm::CmRule{next, action};
  m.halting = halting;
  return m;
}

// counter-exercising pair: halts by pumping counter 1 up and back down
inline cm::CounterMachine counter_halting_machine() {
  return make_machine(2, {{0, 0, 0, 1, +1}, {1, 1, 0, 0, -1}});
}

// counter-exercising pair that grows counter 1 forever
inline cm::CounterMachine counter_growing_machine() {
  return make_machine(2, {{0, 0, 0, 1, +1}, {1, 1, 0, 1, +1}});
}

// embeddable two-step halting machine: s0 -> s1 -> s0, counters untouched
inline cm::CounterMachine halting_two_step_machine() {
  return make_machine(2, {{0, 0, 0, 1, 0}, {1, 0, 0, 0, 0}});
}

// embeddable never-halting machine: one hop to s1, then counter 1 grows
inline cm::CounterMachine non_halting_machine() {
  return make_machine(2, {{0, 0, 0, 1, 0}, {1, 0, 0, 1, +1}, {1, 1, 0, 1, +1}});
}

// three-state machine bouncing both counters, never halting
inline cm::CounterMachine zigzag_machine() {
  return make_machine(3, {{0, 0, 0, 1, +2}, {1, 0, 1, 2, +1}, {2, 1, 1, 1, +1}, {1, 1, 1, 2, -1}});
}

// small random two-dimensional kernels with a finite reachable class: upward
// moves happen only from the origin face, so the class is {0,e1,e2,e1+e2}
inline TransitionKernel random_finite_kernel(std::uint64_t seed) {
  EpisodeRng rng(seed, 0);
  auto frac = [&](long long lo_num, long long hi_num, long long den) {
    long long span = hi_num - lo_num + 1;
    long long num = lo_num + static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(span));
    return Rat(num, den);
  };
  TransitionKernel k;
  k.dimension = 2;
  {
    Rat up1 = frac(1, 5, 12), up2 = frac(1, 5, 12);
    k.rules[0b00] = {Rule{{+1, 0}, up1}, Rule{{0, +1}, up2}, Rule{{0, 0}, Rat(1) - up1 - up2}};
  }
  {
    Rat down = frac(2, 6, 12), hop = frac(1, 3, 12);
    k.rules[0b01] = {Rule{{-1, 0}, down}, Rule{{-1, +1}, hop}, Rule{{0, 0}, Rat(1) - down - hop}};
  }
  {
    Rat down = frac(2, 6, 12);
    k.rules[0b10] = {Rule{{0, -1}, down}, Rule{{0, 0}, Rat(1) - down}};
  }
  {
    Rat both = frac(1, 3, 12), one = frac(1, 3, 12), two = frac(1, 3, 12);
    k.rules[0b11] = {Rule{{-1, -1}, both}, Rule{{-1, 0}, one}, Rule{{0, -1}, two},
                     Rule{{0, 0}, Rat(1) - both - one - two}};
  }
  return k;
}

}  // namespace rwalk::testutil
