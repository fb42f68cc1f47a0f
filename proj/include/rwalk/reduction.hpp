#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rwalk/counter_machine.hpp"
#include "rwalk/kernel.hpp"
#include "rwalk/rational.hpp"

namespace rwalk {

// Coordinate roles of a compiled walk. 0-based:
//   0 .. m-2      occupancy unit of state s_i (i = coord + 1); s_0 has no unit
//   m-1, m        the two counters
//   m+1           norm-tracking coordinate q1 (lenient, +-2)
//   m+2           Bernoulli survival bit q2            (extended walks only)
//   m+3           ray coordinate q3                    (optional)
struct WalkLayout {
  int m = 0;          // number of machine states
  bool extended = false;
  bool with_q3 = false;

  int dim() const { return extended ? (m + 2 + (with_q3 ? 2 : 1)) : (m + 1); }
  int z1() const { return m - 1; }
  int z2() const { return m; }
  int q1() const { return m + 1; }
  int q2() const { return m + 2; }
  int q3() const { return m + 3; }

  // Configuration -> lattice point; counters land on z1/z2, state s_i (i>=1)
  // raises unit i-1, s_0 maps to all-zero units. Extra coordinates are 0.
  WalkState encode(const cm::Configuration& c) const;
  // Inverse on the image; nullopt if the state is no configuration encoding.
  std::optional<cm::Configuration> decode(const WalkState& q) const;
};

struct LinearCertificate {
  std::vector<Rat> w;                 // nonnegative weights
  Rat gamma;                          // drift, > 0
  std::vector<WalkState> exception_set;
};

// What the compiler knows about its own output; serialized into the kernel
// file so stationary-side shortcuts (geometric return tail, cycle
// enumeration) can recognize compiled walks.
struct CompiledMeta {
  WalkLayout layout;
  Rat p;                       // Bernoulli survival parameter
  Rat C;                       // q2 weight in the certificate
  bool split_q1 = false;       // q1 was split into two strict coordinates
  cm::CounterMachine machine;  // embedded copy, used by cycle enumeration
};

struct CompiledWalk {
  TransitionKernel kernel;
  WalkLayout layout;
  Rat p;
  LinearCertificate lyapunov;
};

// Deterministic walk in Z_+^{m+1} executing Gamma on configuration faces and
// draining the smallest coordinate elsewhere. Handles any machine with m >= 2.
TransitionKernel compile_deterministic(const cm::CounterMachine& machine);

// Extended stochastic walk (Q, q1, q2[, q3]). Requires 0 < p < 1 and a
// machine whose reachable transitions keep the q1 bookkeeping inside its
// +-2 jump budget (see the compile error text for the two bad shapes).
CompiledWalk compile_extended(const cm::CounterMachine& machine, const Rat& p, bool with_q3,
                              std::optional<Rat> C = std::nullopt, bool strict_steps = false);

struct BisimulationReport {
  bool agreed = true;
  long long steps_checked = 0;
  std::optional<long long> halted_at;         // machine reached halting config
  std::optional<long long> divergence_step;
  std::string detail;
};

// Lockstep run of the machine against the deterministic embedding. For
// halting machines the comparison stops at the halting step (both sides sit
// on the origin there).
BisimulationReport bisimulation_check(const cm::CounterMachine& machine,
                                      const TransitionKernel& deterministic_kernel,
                                      long long steps);

std::string serialize_certificate(const LinearCertificate& cert);
LinearCertificate parse_certificate(const std::string& text, const std::string& origin_name);
void save_certificate(const LinearCertificate& cert, const std::string& path);
LinearCertificate load_certificate(const std::string& path);

}  // namespace rwalk
