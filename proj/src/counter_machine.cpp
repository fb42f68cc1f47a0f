#include "rwalk/counter_machine.hpp"

#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rwalk/manifest.hpp"

namespace rwalk::cm {

using nlohmann::json;

int CounterMachine::state_index(const std::string& name) const {
  for (std::size_t i = 0; i < state_names.size(); ++i)
    if (state_names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown machine state '" + name + "'");
}

std::string CounterMachine::describe_transition(int state, bool b1, bool b2) const {
  std::ostringstream os;
  os << "Gamma(" << state_names[static_cast<std::size_t>(state)] << ", (" << (b1 ? 1 : 0) << ","
     << (b2 ? 1 : 0) << "))";
  return os.str();
}

Configuration cm_step(const CounterMachine& machine, const Configuration& config) {
  bool b1 = config.z1 > 0, b2 = config.z2 > 0;
  const auto& rule = machine.rule(config.state, b1, b2);
  if (!rule)
    throw std::runtime_error("stuck configuration: " +
                             machine.describe_transition(config.state, b1, b2) +
                             " is undefined");
  Configuration next = config;
  next.state = rule->next;
  switch (rule->action) {
    case 1: next.z1 += 1; break;
    case -1: next.z1 -= 1; break;
    case 2: next.z2 += 1; break;
    case -2: next.z2 -= 1; break;
    case 0: break;
    default:
      throw std::runtime_error("machine-definition error: action " +
                               std::to_string(rule->action) + " outside {-2,-1,0,1,2}");
  }
  if (next.z1 < 0 || next.z2 < 0)
    throw std::runtime_error("machine-definition error: " +
                             machine.describe_transition(config.state, b1, b2) +
                             " decrements a zero counter");
  return next;
}

RunResult cm_run(const CounterMachine& machine, const Configuration& start, long long max_steps) {
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  Configuration cur = start;
  for (long long t = 1; t <= max_steps; ++t) {
    cur = cm_step(machine, cur);
    if (cur == machine.halting) return Halted{t};
  }
  return Running{cur, max_steps};
}

namespace {

[[noreturn]] void parse_fail(const std::string& origin, const std::string& field,
                             const std::string& what) {
  throw std::runtime_error(origin + ": field '" + field + "': " + what);
}

int state_from_json(const CounterMachine& m, const json& j, const std::string& origin,
                    const std::string& field) {
  if (j.is_string()) {
    try {
      return m.state_index(j.get<std::string>());
    } catch (const std::exception& e) {
      parse_fail(origin, field, e.what());
    }
  }
  if (j.is_number_integer()) {
    int idx = j.get<int>();
    if (idx < 0 || idx >= m.num_states()) parse_fail(origin, field, "state index out of range");
    return idx;
  }
  parse_fail(origin, field, "must be a state name or index");
}

}  // namespace

CounterMachine parse_machine(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  CounterMachine m;
  if (!j.contains("states")) parse_fail(origin, "states", "missing");
  if (j["states"].is_number_integer()) {
    int count = j["states"].get<int>();
    if (count < 1) parse_fail(origin, "states", "must be positive");
    for (int i = 0; i < count; ++i) m.state_names.push_back("s" + std::to_string(i));
  } else if (j["states"].is_array()) {
    for (const auto& e : j["states"]) m.state_names.push_back(e.get<std::string>());
    if (m.state_names.empty()) parse_fail(origin, "states", "must be nonempty");
  } else {
    parse_fail(origin, "states", "must be a count or a list of names");
  }
  m.gamma.assign(m.state_names.size(), {});

  if (!j.contains("rules") || !j["rules"].is_array())
    parse_fail(origin, "rules", "missing or not an array");
  std::size_t idx = 0;
  for (const auto& rj : j["rules"]) {
    std::string where = "rules[" + std::to_string(idx++) + "]";
    int s = state_from_json(m, rj.at("state"), origin, where + ".state");
    if (!rj.contains("guard") || !rj["guard"].is_array() || rj["guard"].size() != 2)
      parse_fail(origin, where + ".guard", "must be [b1, b2] with bits 0/1");
    int b1 = rj["guard"][0].get<int>(), b2 = rj["guard"][1].get<int>();
    if ((b1 != 0 && b1 != 1) || (b2 != 0 && b2 != 1))
      parse_fail(origin, where + ".guard", "bits must be 0 or 1");
    CmRule rule;
    rule.next = state_from_json(m, rj.at("next"), origin, where + ".next");
    rule.action = rj.at("action").get<int>();
    if (rule.action < -2 || rule.action > 2)
      parse_fail(origin, where + ".action", "must be in {-2,-1,0,1,2}");
    if (rule.action == -1 && b1 == 0)
      parse_fail(origin, where, "action -1 requires guard b1=1 (counter 1 positive)");
    if (rule.action == -2 && b2 == 0)
      parse_fail(origin, where, "action -2 requires guard b2=1 (counter 2 positive)");
    auto& slot = m.gamma[static_cast<std::size_t>(s)][(b1 ? 1 : 0) + (b2 ? 2 : 0)];
    if (slot) parse_fail(origin, where, "duplicate rule for this (state, guard)");
    slot = rule;
  }

  if (!j.contains("halting")) parse_fail(origin, "halting", "missing");
  const auto& hj = j["halting"];
  m.halting.state = state_from_json(m, hj.at("state"), origin, "halting.state");
  m.halting.z1 = hj.value("z1", 0LL);
  m.halting.z2 = hj.value("z2", 0LL);
  if (m.halting.z1 < 0 || m.halting.z2 < 0)
    parse_fail(origin, "halting", "counters must be nonnegative");
  return m;
}

CounterMachine load_machine(const std::string& path) {
  return parse_machine(read_file(path), path);
}

std::string serialize_machine(const CounterMachine& m) {
  json j;
  j["states"] = m.state_names;
  json rules = json::array();
  for (int s = 0; s < m.num_states(); ++s) {
    for (int g = 0; g < 4; ++g) {
      const auto& rule = m.gamma[static_cast<std::size_t>(s)][static_cast<std::size_t>(g)];
      if (!rule) continue;
      json rj;
      rj["state"] = m.state_names[static_cast<std::size_t>(s)];
      rj["guard"] = {g & 1, (g >> 1) & 1};
      rj["next"] = m.state_names[static_cast<std::size_t>(rule->next)];
      rj["action"] = rule->action;
      rules.push_back(std::move(rj));
    }
  }
  j["rules"] = std::move(rules);
  j["halting"] = {{"state", m.state_names[static_cast<std::size_t>(m.halting.state)]},
                  {"z1", m.halting.z1},
                  {"z2", m.halting.z2}};
  return j.dump(2) + "\n";
}

void save_machine(const CounterMachine& m, const std::string& path) {
  write_file(path, serialize_machine(m));
}

}  // namespace rwalk::cm
