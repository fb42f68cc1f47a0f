#include "rwalk/reduction.hpp"

#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "meta_io.hpp"
#include "rwalk/manifest.hpp"

namespace rwalk {

WalkState WalkLayout::encode(const cm::Configuration& c) const {
  WalkState q(static_cast<std::size_t>(dim()), 0);
  if (c.state != 0) q[static_cast<std::size_t>(c.state - 1)] = 1;
  q[static_cast<std::size_t>(z1())] = c.z1;
  q[static_cast<std::size_t>(z2())] = c.z2;
  return q;
}

std::optional<cm::Configuration> WalkLayout::decode(const WalkState& q) const {
  if (static_cast<int>(q.size()) != dim()) return std::nullopt;
  cm::Configuration c;
  int unit = -1;
  for (int i = 0; i < m - 1; ++i) {
    long long v = q[static_cast<std::size_t>(i)];
    if (v == 0) continue;
    if (v != 1 || unit >= 0) return std::nullopt;
    unit = i;
  }
  for (int i = m + 1; i < dim(); ++i)
    if (q[static_cast<std::size_t>(i)] != 0) return std::nullopt;
  c.state = unit + 1;
  c.z1 = q[static_cast<std::size_t>(z1())];
  c.z2 = q[static_cast<std::size_t>(z2())];
  return c;
}

namespace {

// Walk jump implementing one Gamma transition in the given layout.
std::vector<int> machine_delta(const WalkLayout& layout, int state, const cm::CmRule& rule) {
  std::vector<int> delta(static_cast<std::size_t>(layout.dim()), 0);
  if (state != 0) delta[static_cast<std::size_t>(state - 1)] -= 1;
  if (rule.next != 0) delta[static_cast<std::size_t>(rule.next - 1)] += 1;
  switch (rule.action) {
    case 1: delta[static_cast<std::size_t>(layout.z1())] += 1; break;
    case -1: delta[static_cast<std::size_t>(layout.z1())] -= 1; break;
    case 2: delta[static_cast<std::size_t>(layout.z2())] += 1; break;
    case -2: delta[static_cast<std::size_t>(layout.z2())] -= 1; break;
    default: break;
  }
  return delta;
}

int delta_sum(const std::vector<int>& delta) {
  int s = 0;
  for (int d : delta) s += d;
  return s;
}

// Binary coordinates (state units, q2) are tracked exactly by the face
// pattern; counters, q1 and q3 branch on decrements.
enum class CoordKind { Binary, Nat };

std::vector<CoordKind> coord_kinds(const WalkLayout& layout) {
  std::vector<CoordKind> kinds(static_cast<std::size_t>(layout.dim()), CoordKind::Nat);
  for (int i = 0; i < layout.m - 1; ++i) kinds[static_cast<std::size_t>(i)] = CoordKind::Binary;
  if (layout.extended) kinds[static_cast<std::size_t>(layout.q2())] = CoordKind::Binary;
  return kinds;
}

std::vector<FaceMask> successor_faces(FaceMask face, const std::vector<int>& delta,
                                      const std::vector<CoordKind>& kinds) {
  std::vector<FaceMask> out{0};
  for (std::size_t i = 0; i < delta.size(); ++i) {
    bool positive = face_has(face, static_cast<int>(i));
    int d = delta[i];
    std::vector<bool> choices;
    if (kinds[i] == CoordKind::Binary) {
      int v = (positive ? 1 : 0) + d;
      if (v < 0 || v > 1) throw std::logic_error("binary coordinate leaves {0,1} during closure");
      choices.push_back(v == 1);
    } else if (!positive) {
      if (d < 0) throw std::logic_error("negative move off face during closure");
      choices.push_back(d > 0);
    } else if (d >= 0) {
      choices.push_back(true);
    } else {
      choices.push_back(false);  // value dropped to zero
      choices.push_back(true);   // value stayed positive
    }
    std::vector<FaceMask> next;
    next.reserve(out.size() * choices.size());
    for (FaceMask partial : out)
      for (bool bit : choices)
        next.push_back(partial | (bit ? (FaceMask{1} << i) : 0));
    out = std::move(next);
  }
  return out;
}

FaceMask mask_range(int lo, int hi) {  // [lo, hi)
  FaceMask m = 0;
  for (int i = lo; i < hi; ++i) m |= FaceMask{1} << i;
  return m;
}

struct FaceConfig {
  int state = 0;
  bool b1 = false, b2 = false;
};

// Face -> machine configuration pattern, when the face encodes one.
std::optional<FaceConfig> face_config(const WalkLayout& layout, FaceMask face) {
  int unit = -1;
  for (int i = 0; i < layout.m - 1; ++i) {
    if (!face_has(face, i)) continue;
    if (unit >= 0) return std::nullopt;  // two occupancy units: no configuration
    unit = i;
  }
  FaceConfig fc;
  fc.state = unit + 1;
  fc.b1 = face_has(face, layout.z1());
  fc.b2 = face_has(face, layout.z2());
  return fc;
}

int smallest_member(FaceMask face, int limit) {
  for (int i = 0; i < limit; ++i)
    if (face_has(face, i)) return i;
  return -1;
}

Rule make_rule(std::vector<int> delta, Rat prob) {
  Rule r;
  r.delta = std::move(delta);
  r.prob = std::move(prob);
  return r;
}

[[noreturn]] void unsupported_transition(const cm::CounterMachine& machine, int state, bool b1,
                                         bool b2, const std::string& why) {
  throw std::invalid_argument(
      "cannot embed machine: " + machine.describe_transition(state, b1, b2) + " " + why +
      ". Split the transition through an intermediate state so that moves touching the "
      "zero state do not change a counter in the same step, then recompile.");
}

}  // namespace

TransitionKernel compile_deterministic(const cm::CounterMachine& machine) {
  if (machine.num_states() < 2)
    throw std::invalid_argument("machine has fewer than 2 states; nothing to embed");
  if (machine.halting.state != 0 || machine.halting.z1 != 0 || machine.halting.z2 != 0)
    throw std::invalid_argument("embedding expects the halting configuration (s0, 0, 0)");

  WalkLayout layout;
  layout.m = machine.num_states();
  layout.extended = false;

  TransitionKernel kernel;
  kernel.dimension = layout.dim();
  auto kinds = coord_kinds(layout);

  std::deque<FaceMask> queue{0};
  std::set<FaceMask> seen{0};
  while (!queue.empty()) {
    FaceMask face = queue.front();
    queue.pop_front();
    std::vector<Rule> rules;
    if (auto fc = face_config(layout, face)) {
      const auto& gamma = machine.rule(fc->state, fc->b1, fc->b2);
      if (!gamma) {
        kernel.rules[face];  // machine stuck: dead face, surfaces as a runtime error
        continue;
      }
      rules.push_back(make_rule(machine_delta(layout, fc->state, *gamma), Rat(1)));
    } else {
      // not a configuration: peel the smallest coordinate
      std::vector<int> delta(static_cast<std::size_t>(layout.dim()), 0);
      delta[static_cast<std::size_t>(smallest_member(face, layout.dim()))] = -1;
      rules.push_back(make_rule(std::move(delta), Rat(1)));
    }
    for (const auto& rule : rules)
      for (FaceMask next : successor_faces(face, rule.delta, kinds))
        if (seen.insert(next).second) queue.push_back(next);
    kernel.rules[face] = std::move(rules);
  }
  return kernel;
}

CompiledWalk compile_extended(const cm::CounterMachine& machine, const Rat& p, bool with_q3,
                              std::optional<Rat> C_opt, bool strict_steps) {
  if (p <= Rat(0) || p >= Rat(1))
    throw std::invalid_argument("p = " + format_rational(p) + " outside (0,1)");
  if (machine.num_states() < 2)
    throw std::invalid_argument("machine has fewer than 2 states; nothing to embed");
  if (machine.halting.state != 0 || machine.halting.z1 != 0 || machine.halting.z2 != 0)
    throw std::invalid_argument("embedding expects the halting configuration (s0, 0, 0)");

  WalkLayout layout;
  layout.m = machine.num_states();
  layout.extended = true;
  layout.with_q3 = with_q3;

  // Weight of the survival bit in the linear certificate. The drift budget is
  // the one-step norm growth of the tracked coordinates: 1 for (Q, q1),
  // one more when q3 counts along.
  Rat C = C_opt.value_or(Rat(with_q3 ? 3 : 2) / (Rat(1) - p));
  if (C <= Rat(0)) throw std::invalid_argument("certificate weight C must be positive");

  TransitionKernel kernel;
  kernel.dimension = layout.dim();
  kernel.lenient_steps.insert(layout.q1());
  auto kinds = coord_kinds(layout);

  const int q1 = layout.q1(), q2 = layout.q2();
  const FaceMask qpart_mask = mask_range(0, layout.m + 1);
  const FaceMask drain_mask = mask_range(0, layout.m + 2);  // Q and q1: rule-2 targets

  auto q1_jump = [&](int state, bool b1, bool b2, const std::vector<int>& mdelta,
                     bool q1_positive) {
    int dq1 = 1 - delta_sum(mdelta);
    if (dq1 > 2)
      unsupported_transition(machine, state, b1, b2,
                             "moves into s0 and decrements a counter in one step (the "
                             "norm-tracking coordinate would have to jump by +3)");
    if (dq1 < 0 && !q1_positive)
      unsupported_transition(machine, state, b1, b2,
                             "leaves s0 and increments a counter in one step while the "
                             "norm-tracking coordinate is zero");
    return dq1;
  };

  std::deque<FaceMask> queue{0};
  std::set<FaceMask> seen{0};
  while (!queue.empty()) {
    FaceMask face = queue.front();
    queue.pop_front();
    std::vector<Rule> rules;

    bool q2_up = face_has(face, q2);
    if (face == 0) {
      // origin: the restart step; both branches advance (Q, q1), only the
      // survival bit is random
      const auto& gamma = machine.rule(0, false, false);
      if (!gamma)
        throw std::invalid_argument(
            "machine has no rule at the initial configuration (s0, (0,0)); "
            "the walk cannot leave the origin");
      std::vector<int> delta = machine_delta(layout, 0, *gamma);
      delta[static_cast<std::size_t>(q1)] = q1_jump(0, false, false, delta, false);
      if (with_q3) delta[static_cast<std::size_t>(layout.q3())] = 1;
      std::vector<int> survive = delta, fail = delta;
      survive[static_cast<std::size_t>(q2)] = 1;
      rules.push_back(make_rule(std::move(survive), p));
      rules.push_back(make_rule(std::move(fail), Rat(1) - p));
    } else if (!q2_up) {
      if (with_q3 && (face & drain_mask) == 0) {
        // only q3 is left: it finally drains itself
        std::vector<int> delta(static_cast<std::size_t>(layout.dim()), 0);
        delta[static_cast<std::size_t>(layout.q3())] = -1;
        rules.push_back(make_rule(std::move(delta), Rat(1)));
      } else {
        // q2 = 0: peel the smallest positive coordinate of (Q, q1); q3 waits
        std::vector<int> delta(static_cast<std::size_t>(layout.dim()), 0);
        delta[static_cast<std::size_t>(smallest_member(face & drain_mask, layout.dim()))] = -1;
        rules.push_back(make_rule(std::move(delta), Rat(1)));
      }
    } else if ((face & qpart_mask) == 0) {
      // machine part exhausted with the survival bit still up: the machine
      // halted; Q freezes, the norm bookkeeping continues, q2 drops surely
      if (!face_has(face, q1)) throw std::logic_error("face {q2} materialized; unreachable");
      std::vector<int> delta(static_cast<std::size_t>(layout.dim()), 0);
      delta[static_cast<std::size_t>(q1)] = 1;
      delta[static_cast<std::size_t>(q2)] = -1;
      if (with_q3) delta[static_cast<std::size_t>(layout.q3())] = 1;
      rules.push_back(make_rule(std::move(delta), Rat(1)));
    } else {
      auto fc = face_config(layout, face);
      if (!fc)
        throw std::logic_error("non-configuration face with q2 = 1 materialized; unreachable");
      const auto& gamma = machine.rule(fc->state, fc->b1, fc->b2);
      if (!gamma) {
        kernel.rules[face];  // stuck machine: dead face
        continue;
      }
      std::vector<int> delta = machine_delta(layout, fc->state, *gamma);
      delta[static_cast<std::size_t>(q1)] =
          q1_jump(fc->state, fc->b1, fc->b2, delta, face_has(face, q1));
      if (with_q3) delta[static_cast<std::size_t>(layout.q3())] = 1;
      std::vector<int> survive = delta, fail = delta;
      fail[static_cast<std::size_t>(q2)] = -1;
      rules.push_back(make_rule(std::move(survive), p));
      rules.push_back(make_rule(std::move(fail), Rat(1) - p));
    }

    for (const auto& rule : rules)
      for (FaceMask next : successor_faces(face, rule.delta, kinds))
        if (seen.insert(next).second) queue.push_back(next);
    kernel.rules[face] = std::move(rules);
  }

  CompiledWalk walk;
  walk.layout = layout;
  walk.p = p;
  walk.lyapunov.w.assign(static_cast<std::size_t>(layout.dim()), Rat(1));
  walk.lyapunov.w[static_cast<std::size_t>(q2)] = C;
  walk.lyapunov.gamma = Rat(1);
  walk.lyapunov.exception_set.push_back(origin_state(layout.dim()));

  auto meta = std::make_shared<CompiledMeta>();
  meta->layout = layout;
  meta->p = p;
  meta->C = C;
  meta->machine = machine;

  if (strict_steps) {
    kernel = split_pm2(kernel, q1);
    meta->split_q1 = true;
    // the pair inherits unit weight; everything after q1 shifts up
    walk.lyapunov.w.insert(walk.lyapunov.w.begin() + q1, Rat(1));
    walk.lyapunov.exception_set.clear();
    walk.lyapunov.exception_set.push_back(origin_state(kernel.dimension));
  }
  kernel.meta = meta;
  walk.kernel = std::move(kernel);
  return walk;
}

BisimulationReport bisimulation_check(const cm::CounterMachine& machine,
                                      const TransitionKernel& deterministic_kernel,
                                      long long steps) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  WalkLayout layout;
  layout.m = machine.num_states();
  layout.extended = false;

  BisimulationReport report;
  cm::Configuration config{0, 0, 0};
  WalkState state = origin_state(layout.dim());
  for (long long t = 0; t < steps; ++t) {
    cm::Configuration next_config;
    try {
      next_config = cm_step(machine, config);
    } catch (const std::exception& e) {
      report.detail = std::string("machine stopped at step ") + std::to_string(t) + ": " + e.what();
      report.steps_checked = t;
      return report;
    }
    std::vector<std::pair<WalkState, Rat>> successors;
    try {
      successors = step_distribution(deterministic_kernel, state);
    } catch (const std::exception& e) {
      report.agreed = false;
      report.divergence_step = t + 1;
      report.detail = std::string("walk failed: ") + e.what();
      report.steps_checked = t;
      return report;
    }
    if (successors.size() != 1) {
      report.agreed = false;
      report.divergence_step = t + 1;
      report.detail = "deterministic walk has " + std::to_string(successors.size()) +
                      " successors at " + state_to_string(state);
      report.steps_checked = t;
      return report;
    }
    state = successors.front().first;
    config = next_config;
    if (state != layout.encode(config)) {
      report.agreed = false;
      report.divergence_step = t + 1;
      report.detail = "walk state " + state_to_string(state) + " does not encode configuration (" +
                      machine.state_names[static_cast<std::size_t>(config.state)] + "," +
                      std::to_string(config.z1) + "," + std::to_string(config.z2) + ")";
      report.steps_checked = t + 1;
      return report;
    }
    report.steps_checked = t + 1;
    if (config == machine.halting) {
      report.halted_at = t + 1;
      break;  // the machine stops; the embedding has nothing left to mirror
    }
  }
  return report;
}

namespace {

nlohmann::json state_to_json(const WalkState& q) {
  nlohmann::json arr = nlohmann::json::array();
  for (long long c : q) arr.push_back(c);
  return arr;
}

WalkState state_from_json(const nlohmann::json& j) {
  WalkState q;
  for (const auto& e : j) q.push_back(e.get<long long>());
  return q;
}

}  // namespace

nlohmann::json detail_serialize_compiled_meta(const CompiledMeta& meta) {
  nlohmann::json j;
  j["m"] = meta.layout.m;
  j["with_q3"] = meta.layout.with_q3;
  j["p"] = format_rational(meta.p);
  j["C"] = format_rational(meta.C);
  j["split_q1"] = meta.split_q1;
  j["machine"] = nlohmann::json::parse(cm::serialize_machine(meta.machine));
  return j;
}

std::shared_ptr<const CompiledMeta> detail_parse_compiled_meta(const nlohmann::json& j,
                                                               const std::string& origin) {
  auto meta = std::make_shared<CompiledMeta>();
  meta->layout.m = j.at("m").get<int>();
  meta->layout.extended = true;
  meta->layout.with_q3 = j.at("with_q3").get<bool>();
  meta->p = parse_rational(j.at("p").get<std::string>());
  meta->C = parse_rational(j.at("C").get<std::string>());
  meta->split_q1 = j.value("split_q1", false);
  meta->machine = cm::parse_machine(j.at("machine").dump(), origin + " (embedded machine)");
  return meta;
}

std::string serialize_certificate(const LinearCertificate& cert) {
  nlohmann::json j;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : cert.w) w.push_back(format_rational(x));
  j["w"] = std::move(w);
  j["gamma"] = format_rational(cert.gamma);
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& s : cert.exception_set) ex.push_back(state_to_json(s));
  j["exception_set"] = std::move(ex);
  return j.dump(2) + "\n";
}

LinearCertificate parse_certificate(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  LinearCertificate cert;
  for (const auto& e : j.at("w")) cert.w.push_back(parse_rational(e.get<std::string>()));
  cert.gamma = parse_rational(j.at("gamma").get<std::string>());
  if (j.contains("exception_set"))
    for (const auto& e : j["exception_set"]) cert.exception_set.push_back(state_from_json(e));
  return cert;
}

void save_certificate(const LinearCertificate& cert, const std::string& path) {
  write_file(path, serialize_certificate(cert));
}

LinearCertificate load_certificate(const std::string& path) {
  return parse_certificate(read_file(path), path);
}

}  // namespace rwalk
