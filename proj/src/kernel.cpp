#include "rwalk/kernel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rwalk/manifest.hpp"
#include "rwalk/reduction.hpp"

#include "meta_io.hpp"

namespace rwalk {

using nlohmann::json;

std::string ValidationReport::to_string(int dimension) const {
  std::ostringstream os;
  if (violations.empty()) {
    os << "kernel valid\n";
    return os.str();
  }
  for (const auto& v : violations) {
    os << "violation";
    if (v.face) os << " at face " << face_to_string(*v.face, dimension);
    if (v.delta) {
      os << " delta (";
      for (std::size_t i = 0; i < v.delta->size(); ++i) {
        if (i) os << ",";
        os << (*v.delta)[i];
      }
      os << ")";
    }
    os << ": " << v.message << "\n";
  }
  return os.str();
}

ValidationReport validate_kernel(const TransitionKernel& kernel) {
  ValidationReport report;
  auto add = [&](std::optional<FaceMask> face, const Rule* rule, std::string msg) {
    Violation v;
    v.face = face;
    if (rule) v.delta = rule->delta;
    v.message = std::move(msg);
    report.violations.push_back(std::move(v));
  };

  if (kernel.dimension < 1 || kernel.dimension > 64) {
    add(std::nullopt, nullptr, "dimension must be in [1, 64]");
    return report;
  }
  for (int c : kernel.lenient_steps)
    if (c < 0 || c >= kernel.dimension)
      add(std::nullopt, nullptr,
          "lenient coordinate " + std::to_string(c + 1) + " outside dimension");

  for (const auto& [face, rules] : kernel.rules) {
    if (face >> kernel.dimension)
      add(face, nullptr, "face references coordinates beyond the dimension");
    Rat total(0);
    for (const auto& rule : rules) {
      if (static_cast<int>(rule.delta.size()) != kernel.dimension) {
        add(face, &rule, "delta length differs from dimension");
        continue;
      }
      if (rule.prob <= Rat(0) || rule.prob > Rat(1))
        add(face, &rule, "probability " + format_rational(rule.prob) + " outside (0, 1]");
      total += rule.prob;
      for (int i = 0; i < kernel.dimension; ++i) {
        int d = rule.delta[static_cast<std::size_t>(i)];
        int bound = kernel.lenient_steps.count(i) ? 2 : 1;
        if (d < -bound || d > bound)
          add(face, &rule,
              "coordinate " + std::to_string(i + 1) + " moves by " + std::to_string(d) +
                  ", beyond its allowed step size");
        if (d < 0 && !face_has(face, i))
          add(face, &rule,
              "negative move off face: coordinate " + std::to_string(i + 1) +
                  " is zero on this face");
      }
    }
    if (!rules.empty() && total != Rat(1))
      add(face, nullptr, "face mass " + format_rational(total) + " != 1");
  }
  return report;
}

std::vector<std::pair<WalkState, Rat>> step_distribution(const TransitionKernel& kernel,
                                                         const WalkState& state) {
  if (static_cast<int>(state.size()) != kernel.dimension)
    throw std::invalid_argument("state dimension " + std::to_string(state.size()) +
                                " does not match kernel dimension " +
                                std::to_string(kernel.dimension));
  FaceMask face = face_of(state);
  const auto* rules = kernel.rules_for(face);
  if (rules == nullptr || rules->empty())
    throw std::runtime_error("dead face " + face_to_string(face, kernel.dimension) +
                             " reached at state " + state_to_string(state) +
                             ": the kernel defines no rules there");
  std::vector<std::pair<WalkState, Rat>> out;
  out.reserve(rules->size());
  for (const auto& rule : *rules) {
    WalkState next = state;
    for (int i = 0; i < kernel.dimension; ++i) {
      next[static_cast<std::size_t>(i)] += rule.delta[static_cast<std::size_t>(i)];
      if (next[static_cast<std::size_t>(i)] < 0)
        throw std::runtime_error("rule at face " + face_to_string(face, kernel.dimension) +
                                 " drives coordinate " + std::to_string(i + 1) +
                                 " negative from state " + state_to_string(state));
    }
    out.emplace_back(std::move(next), rule.prob);
  }
  return out;
}

FaceSampler::FaceSampler(const TransitionKernel& kernel) {
  const unsigned __int128 one = 1;
  const unsigned __int128 scale = one << 64;
  for (const auto& [face, rules] : kernel.rules) {
    std::vector<unsigned __int128> cum;
    cum.reserve(rules.size());
    Rat acc(0);
    for (const auto& rule : rules) {
      acc += rule.prob;
      // floor(2^64 * acc), exact
      Int num = acc.numerator() << 64;
      Int q = num / acc.denominator();
      unsigned __int128 threshold = 0;
      for (int limb = 1; limb >= 0; --limb) {
        threshold <<= 64;
        threshold |= static_cast<std::uint64_t>((q >> (64 * limb)) & 0xFFFFFFFFFFFFFFFFULL);
      }
      cum.push_back(threshold);
    }
    if (!cum.empty()) cum.back() = scale;  // the face mass is exactly 1
    tables_[face] = std::move(cum);
  }
}

std::size_t FaceSampler::pick(FaceMask face, std::uint64_t draw) const {
  const auto& cum = tables_.at(face);
  unsigned __int128 d = draw;
  for (std::size_t i = 0; i + 1 < cum.size(); ++i)
    if (d < cum[i]) return i;
  return cum.size() - 1;
}

Trajectory simulate(const TransitionKernel& kernel, const WalkState& start, long long horizon,
                    std::uint64_t seed, std::uint64_t stream) {
  if (static_cast<int>(start.size()) != kernel.dimension)
    throw std::invalid_argument("start dimension does not match kernel");
  FaceSampler sampler(kernel);
  EpisodeRng rng(seed, stream);
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.states.push_back(start);
  WalkState cur = start;
  for (long long t = 0; t < horizon; ++t) {
    FaceMask face = face_of(cur);
    const auto* rules = kernel.rules_for(face);
    if (rules == nullptr || rules->empty())
      throw std::runtime_error("dead face " + face_to_string(face, kernel.dimension) +
                               " reached at state " + state_to_string(cur) + " (step " +
                               std::to_string(t) + ")");
    std::size_t idx = sampler.pick(face, rng.next_u64());
    const auto& delta = (*rules)[idx].delta;
    for (int i = 0; i < kernel.dimension; ++i) {
      cur[static_cast<std::size_t>(i)] += delta[static_cast<std::size_t>(i)];
      if (cur[static_cast<std::size_t>(i)] < 0)
        throw std::runtime_error("negative coordinate " + std::to_string(i + 1) +
                                 " during simulation at step " + std::to_string(t + 1));
    }
    traj.states.push_back(cur);
  }
  return traj;
}

long long simulate_until(const TransitionKernel& kernel, const FaceSampler& sampler,
                         const WalkState& start, long long horizon, EpisodeRng& rng,
                         const WalkState* stop_state) {
  WalkState cur = start;
  for (long long t = 0; t < horizon; ++t) {
    FaceMask face = face_of(cur);
    const auto* rules = kernel.rules_for(face);
    if (rules == nullptr || rules->empty())
      throw std::runtime_error("dead face " + face_to_string(face, kernel.dimension) +
                               " reached at state " + state_to_string(cur));
    std::size_t idx = sampler.pick(face, rng.next_u64());
    const auto& delta = (*rules)[idx].delta;
    for (int i = 0; i < kernel.dimension; ++i)
      cur[static_cast<std::size_t>(i)] += delta[static_cast<std::size_t>(i)];
    if (stop_state && cur == *stop_state) return t + 1;
  }
  return horizon;
}

namespace {

// face variants of the split pair consistent with the original coordinate
// being zero (index 0) or positive (indices 1..3)
constexpr int kPairPatterns[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};

}  // namespace

TransitionKernel split_pm2(const TransitionKernel& kernel, int coord) {
  if (coord < 0 || coord >= kernel.dimension)
    throw std::invalid_argument("split coordinate outside dimension");
  for (const auto& [face, rules] : kernel.rules)
    for (const auto& rule : rules)
      if (rule.delta[static_cast<std::size_t>(coord)] == -2)
        throw std::invalid_argument(
            "split_pm2: coordinate " + std::to_string(coord + 1) + " has a -2 rule at face " +
            face_to_string(face, kernel.dimension) +
            "; no face-determined split preserves nonnegativity for downward double steps");

  // the pair occupies positions coord and coord+1; everything above shifts up
  TransitionKernel out;
  out.dimension = kernel.dimension + 1;
  for (int c : kernel.lenient_steps)
    if (c != coord) out.lenient_steps.insert(c < coord ? c : c + 1);

  auto shift_face = [&](FaceMask face, int a_bit, int b_bit) {
    FaceMask nf = 0;
    for (int i = 0; i < kernel.dimension; ++i) {
      if (i == coord) continue;
      if (face_has(face, i)) nf |= FaceMask{1} << (i < coord ? i : i + 1);
    }
    if (a_bit) nf |= FaceMask{1} << coord;
    if (b_bit) nf |= FaceMask{1} << (coord + 1);
    return nf;
  };

  for (const auto& [face, rules] : kernel.rules) {
    bool coord_positive = face_has(face, coord);
    for (int pat = 0; pat < 4; ++pat) {
      int a = kPairPatterns[pat][0], b = kPairPatterns[pat][1];
      if (coord_positive == (a == 0 && b == 0)) continue;
      std::vector<Rule> new_rules;
      new_rules.reserve(rules.size());
      for (const auto& rule : rules) {
        Rule nr;
        nr.prob = rule.prob;
        nr.delta.assign(static_cast<std::size_t>(out.dimension), 0);
        for (int i = 0; i < kernel.dimension; ++i) {
          if (i == coord) continue;
          nr.delta[static_cast<std::size_t>(i < coord ? i : i + 1)] =
              rule.delta[static_cast<std::size_t>(i)];
        }
        int d = rule.delta[static_cast<std::size_t>(coord)];
        int da = 0, db = 0;
        switch (d) {
          case 2: da = db = 1; break;
          case 1: da = 1; break;
          case 0: break;
          case -1:
            if (a) da = -1;
            else db = -1;
            break;
          default:
            throw std::logic_error("unreachable split case");
        }
        nr.delta[static_cast<std::size_t>(coord)] = da;
        nr.delta[static_cast<std::size_t>(coord + 1)] = db;
        new_rules.push_back(std::move(nr));
      }
      out.rules[shift_face(face, a, b)] = std::move(new_rules);
    }
  }
  return out;
}

namespace {

[[noreturn]] void parse_fail(const std::string& origin, const std::string& field,
                             const std::string& what) {
  throw std::runtime_error(origin + ": field '" + field + "': " + what);
}

FaceMask face_from_json(const json& arr, int dimension, const std::string& origin) {
  FaceMask face = 0;
  for (const auto& e : arr) {
    if (!e.is_number_integer()) parse_fail(origin, "face", "indices must be integers");
    long long idx = e.get<long long>();
    if (idx < 1 || idx > dimension)
      parse_fail(origin, "face", "index " + std::to_string(idx) + " outside 1.." +
                                     std::to_string(dimension));
    face |= FaceMask{1} << (idx - 1);
  }
  return face;
}

json face_to_json(FaceMask face, int dimension) {
  json arr = json::array();
  for (int i = 0; i < dimension; ++i)
    if (face_has(face, i)) arr.push_back(i + 1);
  return arr;
}

}  // namespace

TransitionKernel parse_kernel(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  TransitionKernel k;
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    parse_fail(origin, "dimension", "missing or not an integer");
  k.dimension = j["dimension"].get<int>();
  if (k.dimension < 1 || k.dimension > 64)
    parse_fail(origin, "dimension", "must be in [1, 64]");
  if (j.contains("lenient_steps")) {
    for (const auto& e : j["lenient_steps"]) {
      long long c = e.get<long long>();
      if (c < 1 || c > k.dimension)
        parse_fail(origin, "lenient_steps", "coordinate outside 1..d");
      k.lenient_steps.insert(static_cast<int>(c - 1));
    }
  }
  if (!j.contains("rules") || !j["rules"].is_array())
    parse_fail(origin, "rules", "missing or not an array");
  std::size_t line = 0;
  for (const auto& rj : j["rules"]) {
    ++line;
    std::string where = "rules[" + std::to_string(line - 1) + "]";
    if (!rj.contains("face")) parse_fail(origin, where + ".face", "missing");
    FaceMask face = face_from_json(rj["face"], k.dimension, origin);
    Rule rule;
    if (!rj.contains("delta") || !rj["delta"].is_array() ||
        rj["delta"].size() != static_cast<std::size_t>(k.dimension))
      parse_fail(origin, where + ".delta", "must be an integer array of length d");
    for (const auto& e : rj["delta"]) rule.delta.push_back(e.get<int>());
    if (!rj.contains("prob") || !rj["prob"].is_string())
      parse_fail(origin, where + ".prob",
                 "must be a rational string like \"1/2\" (decimals are rejected)");
    try {
      rule.prob = parse_rational(rj["prob"].get<std::string>());
    } catch (const std::exception& e) {
      parse_fail(origin, where + ".prob", e.what());
    }
    k.rules[face].push_back(std::move(rule));
  }
  if (j.contains("meta") && j["meta"].contains("compiled"))
    k.meta = detail_parse_compiled_meta(j["meta"]["compiled"], origin);
  return k;
}

TransitionKernel load_kernel(const std::string& path) {
  return parse_kernel(read_file(path), path);
}

std::string serialize_kernel(const TransitionKernel& kernel) {
  json j;
  j["dimension"] = kernel.dimension;
  json lenient = json::array();
  for (int c : kernel.lenient_steps) lenient.push_back(c + 1);
  j["lenient_steps"] = lenient;
  json rules = json::array();
  for (const auto& [face, frules] : kernel.rules) {
    // canonical order: faces ascending (std::map), rules by delta
    std::vector<const Rule*> sorted;
    for (const auto& r : frules) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const Rule* a, const Rule* b) { return a->delta < b->delta; });
    for (const Rule* r : sorted) {
      json rj;
      rj["face"] = face_to_json(face, kernel.dimension);
      rj["delta"] = r->delta;
      rj["prob"] = format_rational(r->prob);
      rules.push_back(std::move(rj));
    }
  }
  j["rules"] = std::move(rules);
  if (kernel.meta) j["meta"]["compiled"] = detail_serialize_compiled_meta(*kernel.meta);
  return j.dump(2) + "\n";
}

void save_kernel(const TransitionKernel& kernel, const std::string& path) {
  write_file(path, serialize_kernel(kernel));
}

}  // namespace rwalk
