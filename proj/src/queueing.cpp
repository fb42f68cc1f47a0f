#include "rwalk/queueing.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rwalk/manifest.hpp"
#include "rwalk/rng.hpp"

namespace rwalk::queueing {

using nlohmann::json;

int QueueSystem::total_buffers() const {
  int n = 0;
  for (int j : visits) n += j;
  return n;
}

int QueueSystem::first_buffer(int type) const {
  int b = 1;
  for (int i = 0; i < type; ++i) b += visits[static_cast<std::size_t>(i)];
  return b;
}

PriorityPolicy PriorityPolicy::from_table(int n, std::vector<int> table) {
  if (n < 1 || n > 20) throw std::invalid_argument("buffer count must be in [1, 20]");
  if (table.size() != (std::size_t{1} << n))
    throw std::invalid_argument("policy table must have 2^n entries");
  for (std::size_t b = 0; b < table.size(); ++b) {
    int k = table[b];
    if (k < 0 || k > n) throw std::invalid_argument("policy value outside {0,...,n}");
    if (k > 0 && ((b >> (k - 1)) & 1U) == 0)
      throw std::invalid_argument("inconsistent policy: serves empty buffer " + std::to_string(k) +
                                  " at occupancy index " + std::to_string(b));
  }
  PriorityPolicy p;
  p.n = n;
  p.table = std::move(table);
  return p;
}

PriorityPolicy PriorityPolicy::from_priority_order(int n, const std::vector<int>& order) {
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("priority order must list every buffer once");
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  for (int b : order) {
    if (b < 1 || b > n || seen[static_cast<std::size_t>(b)])
      throw std::invalid_argument("priority order must be a permutation of 1..n");
    seen[static_cast<std::size_t>(b)] = true;
  }
  std::vector<int> table(std::size_t{1} << n, 0);
  for (std::size_t bits = 1; bits < table.size(); ++bits) {
    for (int b : order) {
      if ((bits >> (b - 1)) & 1U) {
        table[bits] = b;
        break;
      }
    }
  }
  PriorityPolicy p;
  p.n = n;
  p.table = std::move(table);
  return p;
}

LoadReport load_factor(const QueueSystem& system) {
  LoadReport report;
  for (int i = 0; i < system.types; ++i) {
    Rat lambda = system.arrival_probs[static_cast<std::size_t>(i)] / Rat(system.slot);
    report.rho += Rat(system.visits[static_cast<std::size_t>(i)]) * lambda;
  }
  report.stable_necessary = report.rho < Rat(1);
  return report;
}

namespace {

std::uint32_t occupancy_bits(const std::vector<long long>& buffers) {
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < buffers.size(); ++i)
    if (buffers[i] > 0) bits |= (1U << i);
  return bits;
}

// buffer index (1-based) -> (type, visit)
std::pair<int, int> locate(const QueueSystem& system, int buffer) {
  int b = buffer;
  for (int i = 0; i < system.types; ++i) {
    if (b <= system.visits[static_cast<std::size_t>(i)]) return {i, b};
    b -= system.visits[static_cast<std::size_t>(i)];
  }
  throw std::logic_error("buffer index out of range");
}

// one service decision; returns true when a part left the system
bool serve_once(const QueueSystem& system, const PriorityPolicy& policy,
                std::vector<long long>& buffers) {
  int k = policy.serve(occupancy_bits(buffers));
  if (k == 0) return false;
  auto [type, visit] = locate(system, k);
  buffers[static_cast<std::size_t>(k - 1)] -= 1;
  if (visit < system.visits[static_cast<std::size_t>(type)]) {
    buffers[static_cast<std::size_t>(k)] += 1;  // next visit buffer is adjacent
    return false;
  }
  return true;  // final visit: the part departs
}

}  // namespace

QueueState queue_step(const QueueSystem& system, const PriorityPolicy& policy,
                      const QueueState& state, const std::vector<bool>& arrivals_at_phase0) {
  QueueState next = state;
  if (next.phase == 0) {
    // arrivals land before the service decision of the same slot
    if (static_cast<int>(arrivals_at_phase0.size()) != system.types)
      throw std::invalid_argument("one arrival draw per type is required at phase 0");
    for (int i = 0; i < system.types; ++i)
      if (arrivals_at_phase0[static_cast<std::size_t>(i)])
        next.buffers[static_cast<std::size_t>(system.first_buffer(i) - 1)] += 1;
  }
  serve_once(system, policy, next.buffers);
  next.phase = (next.phase + 1) % system.slot;
  return next;
}

stationary::ChainRef embedded_chain(const QueueSystem& system, const PriorityPolicy& policy) {
  stationary::ChainRef chain;
  QueueSystem sys = system;
  PriorityPolicy pol = policy;
  chain.successors = [sys, pol](const WalkState& q) {
    if (static_cast<int>(q.size()) != sys.total_buffers())
      throw std::invalid_argument("state does not match the buffer count");
    std::vector<std::pair<WalkState, Rat>> out;
    int I = sys.types;
    for (std::uint32_t outcome = 0; outcome < (1U << I); ++outcome) {
      Rat prob(1);
      std::vector<long long> buffers(q.begin(), q.end());
      for (int i = 0; i < I; ++i) {
        const Rat& pi = sys.arrival_probs[static_cast<std::size_t>(i)];
        if ((outcome >> i) & 1U) {
          prob *= pi;
          buffers[static_cast<std::size_t>(sys.first_buffer(i) - 1)] += 1;
        } else {
          prob *= Rat(1) - pi;
        }
      }
      if (prob == Rat(0)) continue;
      for (int s = 0; s < sys.slot; ++s) serve_once(sys, pol, buffers);
      WalkState next(buffers.begin(), buffers.end());
      bool merged = false;
      for (auto& [state, mass] : out) {
        if (state == next) {
          mass += prob;
          merged = true;
          break;
        }
      }
      if (!merged) out.emplace_back(std::move(next), prob);
    }
    return out;
  };
  return chain;
}

SimulationStats queue_simulate(const QueueSystem& system, const PriorityPolicy& policy,
                               long long epochs, std::uint64_t seed) {
  int n = system.total_buffers();
  SimulationStats stats;
  stats.epochs = epochs;
  stats.mean_occupancy.assign(static_cast<std::size_t>(n), 0.0);

  // arrival thresholds on the 64-bit draw
  std::vector<std::uint64_t> thresholds;
  for (const auto& p : system.arrival_probs) {
    Int scaled = (p.numerator() << 64) / p.denominator();
    thresholds.push_back(static_cast<std::uint64_t>(scaled & Int(0xFFFFFFFFFFFFFFFFULL)));
  }

  std::vector<long long> buffers(static_cast<std::size_t>(n), 0);
  std::vector<long long> occupancy_sum(static_cast<std::size_t>(n), 0);
  long long empty_epochs = 0;
  EpisodeRng rng(seed, 0);
  for (long long m = 0; m < epochs; ++m) {
    // epoch observation at time mM, before this epoch's arrivals
    bool empty = true;
    for (int b = 0; b < n; ++b) {
      occupancy_sum[static_cast<std::size_t>(b)] += buffers[static_cast<std::size_t>(b)];
      if (buffers[static_cast<std::size_t>(b)] > 0) empty = false;
    }
    if (empty) ++empty_epochs;
    for (int i = 0; i < system.types; ++i) {
      const Rat& p = system.arrival_probs[static_cast<std::size_t>(i)];
      bool arrive;
      if (p == Rat(1)) arrive = true;
      else if (p == Rat(0)) arrive = false;
      else arrive = rng.next_u64() < thresholds[static_cast<std::size_t>(i)];
      if (arrive) {
        buffers[static_cast<std::size_t>(system.first_buffer(i) - 1)] += 1;
        stats.total_arrivals += 1;
      }
    }
    for (int s = 0; s < system.slot; ++s)
      if (serve_once(system, policy, buffers)) stats.total_departures += 1;
  }
  for (int b = 0; b < n; ++b)
    stats.mean_occupancy[static_cast<std::size_t>(b)] =
        static_cast<double>(occupancy_sum[static_cast<std::size_t>(b)]) /
        static_cast<double>(epochs);
  stats.empty_epoch_fraction = static_cast<double>(empty_epochs) / static_cast<double>(epochs);
  stats.final_buffers = buffers;
  return stats;
}

QueueSpec parse_queue_spec(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  QueueSpec spec;
  auto fail = [&](const std::string& field, const std::string& what) -> void {
    throw std::runtime_error(origin + ": field '" + field + "': " + what);
  };
  spec.system.types = j.at("types").get<int>();
  if (spec.system.types < 1 || spec.system.types > 16) fail("types", "must be in [1, 16]");
  for (const auto& e : j.at("visits")) {
    int v = e.get<int>();
    if (v < 1) fail("visits", "must be positive");
    spec.system.visits.push_back(v);
  }
  if (static_cast<int>(spec.system.visits.size()) != spec.system.types)
    fail("visits", "one entry per type required");
  spec.system.slot = j.at("slot").get<int>();
  if (spec.system.slot < 1) fail("slot", "M must be >= 1");
  for (const auto& e : j.at("arrival_probs")) {
    if (!e.is_string()) fail("arrival_probs", "probabilities must be rational strings");
    Rat p = parse_rational(e.get<std::string>());
    if (p < Rat(0) || p > Rat(1)) fail("arrival_probs", "must lie in [0, 1]");
    spec.system.arrival_probs.push_back(p);
  }
  if (static_cast<int>(spec.system.arrival_probs.size()) != spec.system.types)
    fail("arrival_probs", "one entry per type required");

  int n = spec.system.total_buffers();
  const auto& pj = j.at("policy");
  if (pj.contains("table")) {
    std::vector<int> table;
    for (const auto& e : pj["table"]) table.push_back(e.get<int>());
    spec.policy = PriorityPolicy::from_table(n, std::move(table));
  } else if (pj.contains("priority_order")) {
    std::vector<int> order;
    for (const auto& e : pj["priority_order"]) order.push_back(e.get<int>());
    spec.policy = PriorityPolicy::from_priority_order(n, order);
  } else {
    fail("policy", "needs 'table' or 'priority_order'");
  }
  return spec;
}

QueueSpec load_queue_spec(const std::string& path) {
  return parse_queue_spec(read_file(path), path);
}

std::string serialize_queue_spec(const QueueSpec& spec) {
  json j;
  j["types"] = spec.system.types;
  j["visits"] = spec.system.visits;
  j["slot"] = spec.system.slot;
  json probs = json::array();
  for (const auto& p : spec.system.arrival_probs) probs.push_back(format_rational(p));
  j["arrival_probs"] = std::move(probs);
  j["policy"]["table"] = spec.policy.table;
  return j.dump(2) + "\n";
}

}  // namespace rwalk::queueing
