#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rwalk/kernel.hpp"
#include "rwalk/lyapunov.hpp"
#include "rwalk/rational.hpp"

namespace rwalk::stationary {

// Finite slice of p^(t)(start, .). `leaked` tracks mass dropped by the
// truncation threshold; it stays 0 in rational mode.
template <class Num>
struct SparseDistribution {
  std::map<WalkState, Num> mass;
  Num leaked{0};
};

struct PropagateOptions {
  long long state_cap = 200000;  // error out before memory blows up
};

// Exact t-step distributions, t = 0..horizon.
std::vector<SparseDistribution<Rat>> propagate(const TransitionKernel& kernel,
                                               const WalkState& start, long long horizon,
                                               const PropagateOptions& opts = {});

// Float mode: states below `truncation` are dropped into `leaked`.
std::vector<SparseDistribution<double>> propagate_float(const TransitionKernel& kernel,
                                                        const WalkState& start, long long horizon,
                                                        double truncation = 1e-15,
                                                        const PropagateOptions& opts = {});

struct ReturnTimeReport {
  WalkState target;
  std::vector<std::pair<long long, Rat>> pmf_prefix;  // (steps, exact mass), positive entries
  Rat tail_mass{0};
  Rat mean_lower{0};
  std::optional<Rat> mean_exact;
  std::optional<Rat> pi_estimate;  // 1/mean when the mean is exact
  bool analytic_tail = false;      // geometric closure used (compiled walks)
  bool mean_via_class_solve = false;  // hitting-time system on a finite class
  // Monte Carlo fields
  std::optional<double> mc_mean;
  std::optional<double> mc_stderr;
  long long mc_episodes = 0;
  long long mc_censored = 0;
};

enum class ReturnMode { Exact, MonteCarlo };

// First-return distribution to `target` via the taboo construction (mass
// re-entering the target is removed and recorded). In exact mode the mean is
// closed analytically for compiled walks whose post-horizon tail is the
// geometric regime of the construction; otherwise mean_exact requires
// tail_mass = 0.
ReturnTimeReport return_time(const TransitionKernel& kernel, const WalkState& target,
                             long long horizon, ReturnMode mode, long long episodes = 0,
                             std::uint64_t seed = 0, const PropagateOptions& opts = {});

// Exact expected first-return time via the taboo hitting-time system, when
// the reachable class of `target` is finite; nullopt otherwise.
std::optional<Rat> exact_mean_return(const TransitionKernel& kernel, const WalkState& target,
                                     long long class_cap = 20000);

// Any enumerable Markov chain; adapters exist for kernels and for the
// queueing embedded chain.
struct ChainRef {
  std::function<std::vector<std::pair<WalkState, Rat>>(const WalkState&)> successors;
};

ChainRef kernel_chain(const TransitionKernel& kernel);

struct StationarySolution {
  std::map<WalkState, Rat> pi;
  long long class_size = 0;
};

// Exact balance solve on the reachable class of seed_state, which must be
// finite (cap) and strongly connected.
StationarySolution solve_stationary_exact(const ChainRef& chain, const WalkState& seed_state,
                                          long long class_cap = 100000);
StationarySolution solve_stationary_exact(const TransitionKernel& kernel,
                                          const WalkState& seed_state,
                                          long long class_cap = 100000);

struct ApproxResult {
  double lower = 0.0;
  double upper = 1.0;
  double p_hat = 0.0;     // period-averaged transient probability at t_star
  long long t_star = 0;
  int period = 1;
  bool certified = false; // false in heuristic mode
  double R = 0.0;
  double rho = 0.0;
};

struct ApproxOptions {
  std::optional<double> R;    // certified mode when both are given
  std::optional<double> rho;
  double epsilon = 1e-3;
  long long horizon_cap = 100000;
  long long class_cap = 100000;
};

// Two-sided approximation of pi(x0) from transient probabilities. The
// transient estimate is averaged over one period of the chain (compiled
// walks have period 2), which is what actually converges to pi(x0).
ApproxResult approx_stationary(const TransitionKernel& kernel,
                               const lyapunov::GeometricCertificate& cert, const WalkState& x0,
                               const WalkState& start, const ApproxOptions& opts);

// One regeneration cycle of the q3-extended compiled walk, keyed by the
// number t of Bernoulli survivals; deterministic given t.
struct CycleProfile {
  long long survivals = 0;
  Rat probability{0};
  long long length = 0;
  bool visits_ray_state = false;  // passes (0,...,0,n)
};

struct ConditionalCycleReport {
  long long n = 0;
  // enumerated truth for this walk
  Rat prob_In{0};
  std::optional<Rat> e_len_given_In;
  std::optional<Rat> e_len_given_not_In;
  Rat e_len{0};
  Rat pi_ray_state{0};            // exact, by renewal-reward
  std::vector<CycleProfile> profiles;
  bool halting_detected = false;
  // reference formulas carried by the construction's source text
  Rat ref_prob_In{0};             // p^n
  Rat ref_e_given_In{0};          // 4 - p
  std::optional<Rat> ref_e_given_not_In;
  std::optional<Rat> ref_pi_ray_state;
  bool matches_reference = false;
};

// Exact cycle enumeration for a compiled, non-halting, q3-enabled walk.
// Throws if the embedded machine halts within the enumeration horizon.
ConditionalCycleReport conditional_cycles(const TransitionKernel& kernel, long long n,
                                          long long enumerate_up_to = 64);

struct LdrPoint {
  long long n = 0;
  Rat pi{0};
  double log_pi_over_n = 0.0;
};

struct LdrReport {
  std::vector<long long> direction;
  std::vector<LdrPoint> points;
  std::optional<double> slope_estimate;  // least-squares slope of log pi(nv) vs n
  std::optional<double> L_minus;
  std::optional<double> L_plus;
  bool infinite_rate = false;  // pi(nv) = 0 beyond some n0 (finite class)
  long long zero_from_n = 0;
};

struct LdrOptions {
  long long n_max = 8;
  long long class_cap = 100000;
  long long enumerate_up_to = 64;
};

// pi(floor(v n)) along the ray; exact solve on finite classes, conditional
// cycle decomposition for compiled q3 walks.
LdrReport ldrate(const TransitionKernel& kernel, const std::vector<long long>& v,
                 const LdrOptions& opts);

}  // namespace rwalk::stationary
