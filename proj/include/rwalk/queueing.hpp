#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rwalk/rational.hpp"
#include "rwalk/stationary.hpp"

namespace rwalk::queueing {

// Single-station system: type i visits the station J_i times, buffer B_ij
// holds parts of type i awaiting visit j. Buffers are numbered 1..n in type
// order. One part of type i arrives at each time mM with probability p_i.
struct QueueSystem {
  int types = 0;
  std::vector<int> visits;
  int slot = 1;  // M
  std::vector<Rat> arrival_probs;

  int total_buffers() const;
  int first_buffer(int type) const;  // 1-based
};

// Generalized priority policy: occupancy bit-vector -> buffer to serve
// (0 = idle). Consistency: u(b)=k>0 requires b_k=1.
struct PriorityPolicy {
  int n = 0;
  std::vector<int> table;  // size 2^n, indexed by sum b_k 2^{k-1}

  static PriorityPolicy from_table(int n, std::vector<int> table);
  static PriorityPolicy from_priority_order(int n, const std::vector<int>& order);
  int serve(std::uint32_t occupancy_bits) const { return table[occupancy_bits]; }
};

struct QueueState {
  std::vector<long long> buffers;
  int phase = 0;  // slot offset in [0, M)
};

struct LoadReport {
  Rat rho{0};
  bool stable_necessary = false;  // rho < 1
};

LoadReport load_factor(const QueueSystem& system);

// One unit of time. Arrivals land at phase 0 (before the service decision,
// the documented intra-slot convention), then one service step runs.
QueueState queue_step(const QueueSystem& system, const PriorityPolicy& policy,
                      const QueueState& state, const std::vector<bool>& arrivals_at_phase0);

// The process watched at epochs mM is a Markov chain over buffer contents;
// one block = the 2^I arrival outcomes followed by M deterministic services.
stationary::ChainRef embedded_chain(const QueueSystem& system, const PriorityPolicy& policy);

struct SimulationStats {
  long long epochs = 0;
  std::vector<double> mean_occupancy;  // time average per buffer, unit steps
  double empty_epoch_fraction = 0.0;
  long long total_arrivals = 0;
  long long total_departures = 0;
  std::vector<long long> final_buffers;
};

SimulationStats queue_simulate(const QueueSystem& system, const PriorityPolicy& policy,
                               long long epochs, std::uint64_t seed);

struct QueueSpec {
  QueueSystem system;
  PriorityPolicy policy;
};

QueueSpec load_queue_spec(const std::string& path);
QueueSpec parse_queue_spec(const std::string& text, const std::string& origin_name);
std::string serialize_queue_spec(const QueueSpec& spec);

}  // namespace rwalk::queueing
