#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rwalk::cm {

// Configuration (s, z1, z2); counters never go negative.
struct Configuration {
  int state = 0;
  long long z1 = 0;
  long long z2 = 0;
  bool operator==(const Configuration&) const = default;
};

struct CmRule {
  int next = 0;
  int action = 0;  // +1/-1 move counter 1, +2/-2 move counter 2, 0 no change
};

// Two-counter machine (S, Gamma). Gamma maps (state, guard) to (state',
// action), where the guard is the positivity pattern of the counters.
// Gamma may be partial in files; reaching an undefined pair is a runtime
// error ("stuck"), not a silent no-op.
struct CounterMachine {
  std::vector<std::string> state_names;                       // s0..s_{m-1}
  std::vector<std::array<std::optional<CmRule>, 4>> gamma;    // [state][b1 + 2*b2]
  Configuration halting;

  int num_states() const { return static_cast<int>(state_names.size()); }
  const std::optional<CmRule>& rule(int state, bool b1, bool b2) const {
    return gamma[static_cast<std::size_t>(state)][(b1 ? 1 : 0) + (b2 ? 2 : 0)];
  }
  int state_index(const std::string& name) const;
  std::string describe_transition(int state, bool b1, bool b2) const;
};

// Applies Gamma once. Throws on a stuck configuration or on a machine whose
// action would drive a counter negative (a definition error: decrements must
// be guarded by the matching positivity bit).
Configuration cm_step(const CounterMachine& machine, const Configuration& config);

struct Halted {
  long long steps = 0;
};
struct Running {
  Configuration last;
  long long steps = 0;
};
using RunResult = std::variant<Halted, Running>;

// Halting is "reaching" the halting configuration at some step T >= 1, so a
// start equal to the halting configuration still runs (re-entry semantics).
RunResult cm_run(const CounterMachine& machine, const Configuration& start, long long max_steps);

CounterMachine load_machine(const std::string& path);
CounterMachine parse_machine(const std::string& text, const std::string& origin_name);
std::string serialize_machine(const CounterMachine& machine);
void save_machine(const CounterMachine& machine, const std::string& path);

}  // namespace rwalk::cm
