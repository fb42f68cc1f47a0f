#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rwalk/rational.hpp"
#include "rwalk/rng.hpp"
#include "rwalk/state.hpp"

namespace rwalk {

// One transition of a face: jump vector plus its exact probability.
struct Rule {
  std::vector<int> delta;
  Rat prob;
};

struct CompiledMeta;  // reduction.hpp; carried through kernel files untouched

// Face-homogeneous transition law on Z_+^d. Jumps are in {-1,0,1} per
// coordinate except on lenient_steps coordinates, which may move by +-2.
// Faces without rules are legal in files; stepping onto one is an error.
struct TransitionKernel {
  int dimension = 0;
  std::set<int> lenient_steps;                 // 0-based
  std::map<FaceMask, std::vector<Rule>> rules;
  std::shared_ptr<const CompiledMeta> meta;    // present on compiler output

  const std::vector<Rule>* rules_for(FaceMask face) const {
    auto it = rules.find(face);
    return it == rules.end() ? nullptr : &it->second;
  }
};

struct Violation {
  std::optional<FaceMask> face;
  std::optional<std::vector<int>> delta;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  std::string to_string(int dimension) const;
};

ValidationReport validate_kernel(const TransitionKernel& kernel);

// All successors with positive probability; masses sum to exactly 1.
// Throws on a dead face or dimension mismatch.
std::vector<std::pair<WalkState, Rat>> step_distribution(const TransitionKernel& kernel,
                                                         const WalkState& state);

// Exact-threshold sampler: rule r is chosen when the 64-bit draw falls inside
// [floor(2^64 cdf_{r-1}), floor(2^64 cdf_r)), so per-step bias is below 2^-63.
class FaceSampler {
 public:
  explicit FaceSampler(const TransitionKernel& kernel);
  // index of the rule to apply at `face` given one uniform draw
  std::size_t pick(FaceMask face, std::uint64_t draw) const;
  bool has_face(FaceMask face) const { return tables_.count(face) > 0; }

 private:
  std::map<FaceMask, std::vector<unsigned __int128>> tables_;  // cumulative
};

struct Trajectory {
  std::vector<WalkState> states;  // horizon + 1 entries
};

// Deterministic function of (kernel, start, horizon, seed); stream selects
// the Monte Carlo episode.
Trajectory simulate(const TransitionKernel& kernel, const WalkState& start, long long horizon,
                    std::uint64_t seed, std::uint64_t stream = 0);

// Same, but pre-built sampler and an early stop when `stop` returns true
// (used by return-time estimation). Returns the step count at stop, or
// horizon if never stopped.
long long simulate_until(const TransitionKernel& kernel, const FaceSampler& sampler,
                         const WalkState& start, long long horizon, EpisodeRng& rng,
                         const WalkState* stop_state);

// Splits a lenient coordinate into a pair so jumps stay in {-1,0,1}:
// +2 -> (+1,+1), +1 -> (+1,0), -1 -> decrement the first positive half.
// Rejects kernels with -2 rules on the coordinate (no face-determined safe
// remap exists for them). The L1-norm process is preserved in distribution.
TransitionKernel split_pm2(const TransitionKernel& kernel, int coord);

// JSON file format (probabilities as "num/den" strings, 1-based indices).
TransitionKernel load_kernel(const std::string& path);
TransitionKernel parse_kernel(const std::string& text, const std::string& origin_name);
std::string serialize_kernel(const TransitionKernel& kernel);
void save_kernel(const TransitionKernel& kernel, const std::string& path);

}  // namespace rwalk
