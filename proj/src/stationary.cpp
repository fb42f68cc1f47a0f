#include "rwalk/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rwalk/reduction.hpp"

namespace rwalk::stationary {

namespace {

void apply_delta(WalkState& q, const std::vector<int>& delta, const TransitionKernel& kernel) {
  for (int i = 0; i < kernel.dimension; ++i) {
    q[static_cast<std::size_t>(i)] += delta[static_cast<std::size_t>(i)];
    if (q[static_cast<std::size_t>(i)] < 0)
      throw std::runtime_error("propagation drove coordinate " + std::to_string(i + 1) +
                               " negative");
  }
}

const std::vector<Rule>& rules_or_throw(const TransitionKernel& kernel, const WalkState& q) {
  FaceMask face = face_of(q);
  const auto* rules = kernel.rules_for(face);
  if (rules == nullptr || rules->empty())
    throw std::runtime_error("dead face " + face_to_string(face, kernel.dimension) +
                             " reached at state " + state_to_string(q));
  return *rules;
}

}  // namespace

std::vector<SparseDistribution<Rat>> propagate(const TransitionKernel& kernel,
                                               const WalkState& start, long long horizon,
                                               const PropagateOptions& opts) {
  if (static_cast<int>(start.size()) != kernel.dimension)
    throw std::invalid_argument("start dimension does not match kernel");
  std::vector<SparseDistribution<Rat>> out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  SparseDistribution<Rat> cur;
  cur.mass[start] = Rat(1);
  out.push_back(cur);
  for (long long t = 0; t < horizon; ++t) {
    SparseDistribution<Rat> next;
    for (const auto& [state, mass] : cur.mass) {
      for (const auto& rule : rules_or_throw(kernel, state)) {
        WalkState q = state;
        apply_delta(q, rule.delta, kernel);
        next.mass[q] += mass * rule.prob;
      }
    }
    if (static_cast<long long>(next.mass.size()) > opts.state_cap)
      throw std::runtime_error("propagation exceeded the state cap of " +
                               std::to_string(opts.state_cap) + " at step " +
                               std::to_string(t + 1) +
                               "; raise the cap or use float mode with truncation");
    out.push_back(next);
    cur = std::move(next);
  }
  return out;
}

std::vector<SparseDistribution<double>> propagate_float(const TransitionKernel& kernel,
                                                        const WalkState& start, long long horizon,
                                                        double truncation,
                                                        const PropagateOptions& opts) {
  if (static_cast<int>(start.size()) != kernel.dimension)
    throw std::invalid_argument("start dimension does not match kernel");
  std::vector<SparseDistribution<double>> out;
  SparseDistribution<double> cur;
  cur.mass[start] = 1.0;
  out.push_back(cur);
  for (long long t = 0; t < horizon; ++t) {
    SparseDistribution<double> next;
    next.leaked = cur.leaked;
    for (const auto& [state, mass] : cur.mass) {
      for (const auto& rule : rules_or_throw(kernel, state)) {
        WalkState q = state;
        apply_delta(q, rule.delta, kernel);
        next.mass[q] += mass * to_double(rule.prob);
      }
    }
    for (auto it = next.mass.begin(); it != next.mass.end();) {
      if (it->second < truncation) {
        next.leaked += it->second;
        it = next.mass.erase(it);
      } else {
        ++it;
      }
    }
    if (static_cast<long long>(next.mass.size()) > opts.state_cap)
      throw std::runtime_error("propagation exceeded the state cap of " +
                               std::to_string(opts.state_cap) + " at step " +
                               std::to_string(t + 1));
    out.push_back(next);
    cur = std::move(next);
  }
  return out;
}

namespace {

// geometric return regime of a compiled walk: returns at offset + period*t
// with mass (1-p)p^t. Checks the observed prefix, then closes the tail.
struct GeometricTail {
  Rat mean_tail;
  Rat tail_mass;
};

std::optional<GeometricTail> try_geometric_closure(const ReturnTimeReport& report,
                                                   const CompiledMeta& meta, long long horizon) {
  const Rat& p = meta.p;
  long long period = meta.layout.with_q3 ? 3 : 2;
  long long offset = period;
  long long t_hi = (horizon - offset) / period;  // last fully observed index
  if (t_hi < 0) return std::nullopt;
  // every observed entry must sit on the lattice with the geometric mass
  std::size_t expect = 0;
  for (const auto& [steps, mass] : report.pmf_prefix) {
    if (expect > static_cast<std::size_t>(t_hi)) return std::nullopt;
    if (steps != offset + period * static_cast<long long>(expect)) return std::nullopt;
    if (mass != (Rat(1) - p) * rat_pow(p, expect)) return std::nullopt;
    ++expect;
  }
  if (expect != static_cast<std::size_t>(t_hi) + 1) return std::nullopt;
  long long s = t_hi + 1;
  Rat ps = rat_pow(p, static_cast<unsigned long long>(s));
  if (report.tail_mass != ps) return std::nullopt;
  // sum_{t>=s} (1-p) p^t (period*t + offset), with offset = period
  Rat one_over = Rat(1) / (Rat(1) - p);
  GeometricTail tail;
  tail.tail_mass = ps;
  tail.mean_tail = Rat(period) * ps * (Rat(s) + one_over);
  return tail;
}

}  // namespace

ReturnTimeReport return_time(const TransitionKernel& kernel, const WalkState& target,
                             long long horizon, ReturnMode mode, long long episodes,
                             std::uint64_t seed, const PropagateOptions& opts) {
  if (static_cast<int>(target.size()) != kernel.dimension)
    throw std::invalid_argument("target dimension does not match kernel");
  ReturnTimeReport report;
  report.target = target;

  if (mode == ReturnMode::Exact) {
    SparseDistribution<Rat> cur;
    cur.mass[target] = Rat(1);
    Rat returned(0);
    for (long long t = 1; t <= horizon; ++t) {
      SparseDistribution<Rat> next;
      for (const auto& [state, mass] : cur.mass) {
        for (const auto& rule : rules_or_throw(kernel, state)) {
          WalkState q = state;
          apply_delta(q, rule.delta, kernel);
          next.mass[q] += mass * rule.prob;
        }
      }
      auto hit = next.mass.find(target);
      if (hit != next.mass.end()) {
        report.pmf_prefix.emplace_back(t, hit->second);
        returned += hit->second;
        report.mean_lower += Rat(t) * hit->second;
        next.mass.erase(hit);
      }
      if (static_cast<long long>(next.mass.size()) > opts.state_cap)
        throw std::runtime_error("return-time propagation exceeded the state cap of " +
                                 std::to_string(opts.state_cap));
      cur = std::move(next);
      if (cur.mass.empty()) break;
    }
    report.tail_mass = Rat(1) - returned;
    if (report.tail_mass == Rat(0)) {
      report.mean_exact = report.mean_lower;
    } else if (kernel.meta && target == origin_state(kernel.dimension)) {
      if (auto tail = try_geometric_closure(report, *kernel.meta, horizon)) {
        report.mean_exact = report.mean_lower + tail->mean_tail;
        report.analytic_tail = true;
      }
    }
    if (!report.mean_exact) {
      if (auto mean = exact_mean_return(kernel, target)) {
        report.mean_exact = mean;
        report.mean_via_class_solve = true;
      }
    }
    if (report.mean_exact && *report.mean_exact > Rat(0))
      report.pi_estimate = Rat(1) / *report.mean_exact;
    return report;
  }

  // Monte Carlo: episode i draws from EpisodeRng(seed, i); integer
  // accumulators keep the result independent of the thread count.
  if (episodes <= 0) throw std::invalid_argument("episodes must be positive in mc mode");
  FaceSampler sampler(kernel);
  unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  struct Partial {
    unsigned long long sum = 0;
    unsigned __int128 sumsq = 0;
    long long completed = 0;
    long long censored = 0;
    std::map<long long, long long> pmf;
  };
  std::vector<Partial> partials(workers);
  auto run = [&](unsigned w) {
    Partial& part = partials[w];
    for (long long i = static_cast<long long>(w); i < episodes;
         i += static_cast<long long>(workers)) {
      EpisodeRng rng(seed, static_cast<std::uint64_t>(i));
      long long steps = simulate_until(kernel, sampler, target, horizon, rng, &target);
      if (steps >= horizon) {
        part.censored += 1;
        continue;
      }
      part.completed += 1;
      part.sum += static_cast<unsigned long long>(steps);
      part.sumsq += static_cast<unsigned __int128>(steps) * static_cast<unsigned __int128>(steps);
      part.pmf[steps] += 1;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& th : pool) th.join();

  unsigned long long sum = 0;
  unsigned __int128 sumsq = 0;
  long long completed = 0, censored = 0;
  std::map<long long, long long> pmf;
  for (const auto& part : partials) {
    sum += part.sum;
    sumsq += part.sumsq;
    completed += part.completed;
    censored += part.censored;
    for (const auto& [k, v] : part.pmf) pmf[k] += v;
  }
  report.mc_episodes = episodes;
  report.mc_censored = censored;
  if (completed > 0) {
    double n = static_cast<double>(completed);
    double mean = static_cast<double>(sum) / n;
    double ex2 = static_cast<double>(sumsq) / n;
    double var = std::max(0.0, (ex2 - mean * mean) * n / std::max(1.0, n - 1));
    report.mc_mean = mean;
    report.mc_stderr = std::sqrt(var / n);
    for (const auto& [steps, count] : pmf)
      report.pmf_prefix.emplace_back(steps, Rat(count) / Rat(completed));
  }
  return report;
}

ChainRef kernel_chain(const TransitionKernel& kernel) {
  ChainRef chain;
  chain.successors = [&kernel](const WalkState& q) { return step_distribution(kernel, q); };
  return chain;
}

namespace {

struct ClassGraph {
  std::vector<WalkState> states;
  std::map<WalkState, int> index;
  std::vector<std::vector<std::pair<int, Rat>>> edges;
};

ClassGraph closure(const ChainRef& chain, const WalkState& seed, long long cap) {
  ClassGraph g;
  std::deque<int> queue;
  g.states.push_back(seed);
  g.index[seed] = 0;
  queue.push_back(0);
  g.edges.emplace_back();
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    auto succ = chain.successors(g.states[static_cast<std::size_t>(u)]);
    for (auto& [state, prob] : succ) {
      auto [it, inserted] = g.index.try_emplace(state, static_cast<int>(g.states.size()));
      if (inserted) {
        if (static_cast<long long>(g.states.size()) >= cap)
          throw std::runtime_error(
              "reachable class exceeds the cap of " + std::to_string(cap) +
              " states; the class may be infinite. Use return-time or Monte Carlo modes.");
        g.states.push_back(state);
        g.edges.emplace_back();
        queue.push_back(it->second);
      }
      g.edges[static_cast<std::size_t>(u)].emplace_back(it->second, prob);
    }
  }
  return g;
}

bool strongly_connected(const ClassGraph& g) {
  int n = static_cast<int>(g.states.size());
  auto reach = [&](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          queue.push_back(v);
        }
      }
    }
    return count == n;
  };
  std::vector<std::vector<int>> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u)
    for (const auto& [v, prob] : g.edges[static_cast<std::size_t>(u)]) {
      fwd[static_cast<std::size_t>(u)].push_back(v);
      bwd[static_cast<std::size_t>(v)].push_back(u);
    }
  return reach(fwd) && reach(bwd);
}

}  // namespace

namespace {

// in-place reduction of an n x (n+1) augmented system; false when singular
bool gauss_solve(std::vector<std::vector<Rat>>& a, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    for (int row = col; row < n; ++row) {
      if (a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] != Rat(0)) {
        pivot = row;
        break;
      }
    }
    if (pivot < 0) return false;
    std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(pivot)]);
    Rat inv = Rat(1) / a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    for (int j = col; j <= n; ++j) a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)] *= inv;
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      Rat factor = a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
      if (factor == Rat(0)) continue;
      for (int j = col; j <= n; ++j)
        a[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] -=
            factor * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
    }
  }
  return true;
}

}  // namespace

StationarySolution solve_stationary_exact(const ChainRef& chain, const WalkState& seed_state,
                                          long long class_cap) {
  ClassGraph g = closure(chain, seed_state, class_cap);
  if (!strongly_connected(g))
    throw std::runtime_error(
        "the reachable class of the seed state is not a single communicating class; "
        "stationary balance is defined on the communicating class only");
  int n = static_cast<int>(g.states.size());

  // balance equations (first one replaced by normalization), exact Gauss
  std::vector<std::vector<Rat>> a(static_cast<std::size_t>(n),
                                  std::vector<Rat>(static_cast<std::size_t>(n) + 1, Rat(0)));
  for (int j = 0; j < n; ++j) a[0][static_cast<std::size_t>(j)] = Rat(1);
  a[0][static_cast<std::size_t>(n)] = Rat(1);
  for (int u = 0; u < n; ++u)
    for (const auto& [v, prob] : g.edges[static_cast<std::size_t>(u)]) {
      if (v == 0) continue;  // row 0 is the normalization
      a[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] += prob;
    }
  for (int j = 1; j < n; ++j) a[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] -= Rat(1);

  if (!gauss_solve(a, n))
    throw std::runtime_error("singular balance system; class is not irreducible");

  StationarySolution sol;
  sol.class_size = n;
  for (int i = 0; i < n; ++i) {
    const Rat& pi = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)];
    if (pi <= Rat(0))
      throw std::runtime_error("balance solve produced a non-positive mass; class is degenerate");
    sol.pi[g.states[static_cast<std::size_t>(i)]] = pi;
  }
  return sol;
}

StationarySolution solve_stationary_exact(const TransitionKernel& kernel,
                                          const WalkState& seed_state, long long class_cap) {
  return solve_stationary_exact(kernel_chain(kernel), seed_state, class_cap);
}

std::optional<Rat> exact_mean_return(const TransitionKernel& kernel, const WalkState& target,
                                     long long class_cap) {
  ClassGraph g;
  auto chain = kernel_chain(kernel);
  try {
    g = closure(chain, target, class_cap);
  } catch (const std::exception&) {
    return std::nullopt;  // class too large, possibly infinite
  }
  int n = static_cast<int>(g.states.size());
  if (n == 1) return Rat(1);  // only a self-loop at the target

  // h(y) = expected steps from y to the target; the target's row is excluded
  int m = n - 1;
  std::vector<std::vector<Rat>> a(static_cast<std::size_t>(m),
                                  std::vector<Rat>(static_cast<std::size_t>(m) + 1, Rat(0)));
  for (int y = 1; y < n; ++y) {
    auto& row = a[static_cast<std::size_t>(y - 1)];
    row[static_cast<std::size_t>(y - 1)] = Rat(1);
    row[static_cast<std::size_t>(m)] = Rat(1);
    for (const auto& [z, prob] : g.edges[static_cast<std::size_t>(y)])
      if (z != 0) row[static_cast<std::size_t>(z - 1)] -= prob;
  }
  if (!gauss_solve(a, m)) return std::nullopt;  // some state never reaches the target

  Rat mean(1);
  for (const auto& [z, prob] : g.edges[0])
    if (z != 0) mean += prob * a[static_cast<std::size_t>(z - 1)][static_cast<std::size_t>(m)];
  return mean;
}

namespace {

int chain_period(const ClassGraph& g) {
  // gcd of level(u) + 1 - level(v) over edges, on a strongly connected class
  std::vector<long long> level(g.states.size(), -1);
  std::deque<int> queue{0};
  level[0] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (const auto& [v, prob] : g.edges[static_cast<std::size_t>(u)]) {
      if (level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  long long d = 0;
  for (std::size_t u = 0; u < g.states.size(); ++u)
    for (const auto& [v, prob] : g.edges[u])
      d = std::gcd(d, level[u] + 1 - level[static_cast<std::size_t>(v)]);
  return d == 0 ? 1 : static_cast<int>(std::llabs(d));
}

double mass_at(const SparseDistribution<double>& dist, const WalkState& q) {
  auto it = dist.mass.find(q);
  return it == dist.mass.end() ? 0.0 : it->second;
}

}  // namespace

ApproxResult approx_stationary(const TransitionKernel& kernel,
                               const lyapunov::GeometricCertificate& cert, const WalkState& x0,
                               const WalkState& start, const ApproxOptions& opts) {
  if (opts.epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  ApproxResult res;
  double phi_start = lyapunov::phi_g(cert, start);
  double phi_x0 = lyapunov::phi_g(cert, x0);

  // the transient estimate converges to pi(x0) only after averaging over one
  // period of the class (compiled walks are periodic)
  std::optional<StationarySolution> exact;
  try {
    ClassGraph g = closure(kernel_chain(kernel), start, opts.class_cap);
    res.period = chain_period(g);
    if (strongly_connected(g)) exact = solve_stationary_exact(kernel, start, opts.class_cap);
  } catch (const std::exception&) {
    res.period = kernel.meta ? (kernel.meta->layout.with_q3 ? 3 : 2) : 1;
  }

  if (opts.R && opts.rho) {
    if (*opts.rho <= 0 || *opts.rho >= 1) throw std::invalid_argument("rho must be in (0,1)");
    if (*opts.R <= 0) throw std::invalid_argument("R must be positive");
    res.R = *opts.R;
    res.rho = *opts.rho;
    res.certified = true;
  } else {
    // heuristic constants: rho from the geometric drift, R fitted against the
    // observed early decay; the result is flagged non-certified
    res.rho = std::min(0.999, cert.gamma_g);
    long long fit_horizon = 20 + res.period;
    auto dists = propagate_float(kernel, start, fit_horizon, 0.0);
    double pi_ref;
    if (exact) {
      pi_ref = to_double(exact->pi.count(x0) ? exact->pi.at(x0) : Rat(0));
    } else {
      double acc = 0.0;
      for (int j = 0; j < res.period; ++j)
        acc += mass_at(dists[static_cast<std::size_t>(fit_horizon - j)], x0);
      pi_ref = acc / res.period;
    }
    double r = 1e-9;
    for (long long t = 1; t + res.period - 1 <= fit_horizon && t <= 20; ++t) {
      double avg = 0.0;
      for (int j = 0; j < res.period; ++j)
        avg += mass_at(dists[static_cast<std::size_t>(t + j)], x0);
      avg /= res.period;
      double bound = phi_start * phi_x0 * std::pow(res.rho, static_cast<double>(t));
      r = std::max(r, std::abs(avg - pi_ref) / bound);
    }
    res.R = r * 1.25;
    res.certified = false;
  }

  double needed = opts.epsilon / (res.R * phi_start * phi_x0);
  long long t_star = 1;
  if (needed < 1.0)
    t_star = static_cast<long long>(std::ceil(std::log(needed) / std::log(res.rho)));
  if (t_star < 1) t_star = 1;
  if (t_star > opts.horizon_cap)
    throw std::runtime_error("required horizon t = " + std::to_string(t_star) +
                             " exceeds the cap of " + std::to_string(opts.horizon_cap));
  res.t_star = t_star;

  auto dists = propagate_float(kernel, start, t_star + res.period - 1, 0.0);
  double avg = 0.0;
  for (int j = 0; j < res.period; ++j)
    avg += mass_at(dists[static_cast<std::size_t>(t_star + j)], x0);
  res.p_hat = avg / res.period;
  res.lower = std::max(0.0, res.p_hat - opts.epsilon);
  res.upper = res.p_hat + opts.epsilon;
  return res;
}

namespace {

// Walks one regeneration cycle of a compiled q3 walk with a prescribed number
// of Bernoulli survivals; everything else is deterministic.
struct CyclePath {
  long long length = 0;
  bool visits = false;
  long long visit_count = 0;
  bool hit_halted_face = false;
};

CyclePath walk_cycle(const TransitionKernel& kernel, const CompiledMeta& meta, long long survivals,
                     long long n) {
  const WalkLayout& layout = meta.layout;
  WalkState origin = origin_state(kernel.dimension);
  WalkState ray_state = origin;
  ray_state[static_cast<std::size_t>(layout.q3())] = n;

  CyclePath path;
  WalkState cur = origin;
  long long flips = 0;
  long long cap = 3 * survivals + 64;
  for (long long step = 0; step < cap; ++step) {
    const auto& rules = *kernel.rules_for(face_of(cur));
    std::size_t pick = 0;
    if (rules.size() == 2) {
      // the survive branch is the one with the larger q2 move
      std::size_t survive_idx = rules[0].delta[static_cast<std::size_t>(layout.q2())] >
                                        rules[1].delta[static_cast<std::size_t>(layout.q2())]
                                    ? 0
                                    : 1;
      pick = (flips < survivals) ? survive_idx : 1 - survive_idx;
      ++flips;
    } else if (face_has(face_of(cur), layout.q2()) && rules.size() == 1) {
      path.hit_halted_face = true;
    }
    for (int i = 0; i < kernel.dimension; ++i)
      cur[static_cast<std::size_t>(i)] += rules[pick].delta[static_cast<std::size_t>(i)];
    path.length += 1;
    if (n > 0 && cur == ray_state) path.visit_count += 1;
    if (cur == origin) {
      path.visits = (n == 0) || path.visit_count > 0;
      return path;
    }
  }
  throw std::logic_error("cycle did not close within its step cap");
}

Rat sum_geom(const Rat& p, long long from) {  // sum_{t>=from} (1-p) p^t
  return rat_pow(p, static_cast<unsigned long long>(from));
}

Rat sum_geom_t(const Rat& p, long long from) {  // sum_{t>=from} (1-p) p^t t
  Rat ps = rat_pow(p, static_cast<unsigned long long>(from));
  return ps * (Rat(from) + p / (Rat(1) - p));
}

}  // namespace

ConditionalCycleReport conditional_cycles(const TransitionKernel& kernel, long long n,
                                          long long enumerate_up_to) {
  if (!kernel.meta) throw std::invalid_argument("conditional cycles need a compiled kernel");
  const CompiledMeta& meta = *kernel.meta;
  if (!meta.layout.with_q3)
    throw std::invalid_argument("conditional cycles need the ray coordinate (compile --with-q3)");
  if (meta.split_q1)
    throw std::invalid_argument("conditional cycles do not support strict-step kernels");
  if (n < 0) throw std::invalid_argument("n must be nonnegative");
  long long t_cut = std::max(enumerate_up_to, n + 2);

  ConditionalCycleReport report;
  report.n = n;
  const Rat& p = meta.p;
  const Rat one(1);

  Rat prob_visit(0), e_len(0), e_len_visit(0);
  for (long long t = 0; t <= t_cut; ++t) {
    CyclePath path = walk_cycle(kernel, meta, t, n);
    if (path.hit_halted_face) {
      report.halting_detected = true;
      throw std::runtime_error(
          "the embedded machine halts within the cycle horizon; conditional cycle "
          "decomposition applies to the non-halting construction only");
    }
    CycleProfile profile;
    profile.survivals = t;
    profile.probability = (one - p) * rat_pow(p, static_cast<unsigned long long>(t));
    profile.length = path.length;
    profile.visits_ray_state = path.visits;
    if (path.length != 3 * t + 3)
      throw std::logic_error("unexpected cycle length " + std::to_string(path.length) +
                             " for t = " + std::to_string(t));
    if (path.visits != (n == 0 || t >= n - 1))
      throw std::logic_error("unexpected visit pattern at t = " + std::to_string(t));
    if (n > 0 && path.visits && path.visit_count != 1)
      throw std::logic_error("multiple ray-state visits in one cycle");
    report.profiles.push_back(profile);
    e_len += profile.probability * Rat(path.length);
    if (path.visits) {
      prob_visit += profile.probability;
      e_len_visit += profile.probability * Rat(path.length);
    }
  }
  // tails: every t > t_cut survives past n-1, so it visits, with length 3t+3
  Rat tail_len = Rat(3) * sum_geom_t(p, t_cut + 1) + Rat(3) * sum_geom(p, t_cut + 1);
  e_len += tail_len;
  prob_visit += sum_geom(p, t_cut + 1);
  e_len_visit += tail_len;

  report.prob_In = prob_visit;
  report.e_len = e_len;
  if (prob_visit > Rat(0)) report.e_len_given_In = e_len_visit / prob_visit;
  if (prob_visit < one)
    report.e_len_given_not_In = (e_len - e_len_visit) / (one - prob_visit);
  report.pi_ray_state = prob_visit / e_len;  // renewal-reward, one visit per cycle

  report.ref_prob_In = rat_pow(p, static_cast<unsigned long long>(n));
  report.ref_e_given_In = Rat(4) - p;
  if (n >= 1) {
    Rat denom = one - report.ref_prob_In;
    if (denom > Rat(0)) {
      report.ref_e_given_not_In =
          (Rat(2) / (one - p) - report.ref_e_given_In * report.ref_prob_In) / denom;
      Rat inv_pi = (one / report.ref_prob_In) * *report.ref_e_given_not_In + report.ref_e_given_In;
      report.ref_pi_ray_state = one / inv_pi;
    }
  }
  report.matches_reference =
      report.prob_In == report.ref_prob_In && report.e_len_given_In &&
      *report.e_len_given_In == report.ref_e_given_In;
  return report;
}

LdrReport ldrate(const TransitionKernel& kernel, const std::vector<long long>& v,
                 const LdrOptions& opts) {
  if (static_cast<int>(v.size()) != kernel.dimension)
    throw std::invalid_argument("direction dimension does not match kernel");
  bool nonzero = false;
  for (long long c : v) {
    if (c < 0) throw std::invalid_argument("direction must be nonnegative");
    if (c > 0) nonzero = true;
  }
  if (!nonzero) throw std::invalid_argument("direction must be nonzero");

  LdrReport report;
  report.direction = v;

  auto ray_point = [&](long long n) {
    WalkState q(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) q[i] = v[i] * n;
    return q;
  };

  std::optional<StationarySolution> exact;
  try {
    exact = solve_stationary_exact(kernel, origin_state(kernel.dimension), opts.class_cap);
  } catch (const std::exception&) {
    exact.reset();
  }

  bool ray_is_q3 = false;
  if (kernel.meta && kernel.meta->layout.with_q3 && !kernel.meta->split_q1) {
    ray_is_q3 = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      long long want = (static_cast<int>(i) == kernel.meta->layout.q3()) ? 1 : 0;
      if (v[i] != want) ray_is_q3 = false;
    }
  }

  for (long long n = 1; n <= opts.n_max; ++n) {
    Rat pi(0);
    if (exact) {
      auto it = exact->pi.find(ray_point(n));
      if (it != exact->pi.end()) pi = it->second;
    } else if (ray_is_q3) {
      pi = conditional_cycles(kernel, n, opts.enumerate_up_to).pi_ray_state;
    } else {
      throw std::runtime_error(
          "the reachable class is infinite and the direction is not the compiled ray "
          "coordinate; no exact route to pi(nv) is available");
    }
    LdrPoint point;
    point.n = n;
    point.pi = pi;
    point.log_pi_over_n = pi > Rat(0)
                              ? log_rational(pi) / static_cast<double>(n)
                              : -std::numeric_limits<double>::infinity();
    report.points.push_back(point);
  }

  // +infinity flag: mass vanishes from some n0 on (certain on finite classes)
  long long zero_from = opts.n_max + 1;
  for (long long n = opts.n_max; n >= 1; --n) {
    if (report.points[static_cast<std::size_t>(n - 1)].pi == Rat(0))
      zero_from = n;
    else
      break;
  }
  if (exact && zero_from <= opts.n_max) {
    report.infinite_rate = true;
    report.zero_from_n = zero_from;
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto& point : report.points)
    if (point.pi > Rat(0))
      pts.emplace_back(static_cast<double>(point.n), log_rational(point.pi));
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double m = static_cast<double>(pts.size());
    report.slope_estimate = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    std::size_t tail_from = pts.size() >= 3 ? pts.size() - 3 : 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = tail_from; i < pts.size(); ++i) {
      double value = pts[i].second / pts[i].first;
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
    report.L_minus = lo;
    report.L_plus = hi;
  }
  return report;
}

}  // namespace rwalk::stationary
