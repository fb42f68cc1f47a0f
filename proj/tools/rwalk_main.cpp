// rwalk: build, validate, and analyze constrained random walks on the
// nonnegative orthant, compile counter machines into them, and analyze the
// slotted priority queue model.
//
// Exit codes: 0 success, 1 input/validation/check failure, 2 parameter error.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rwalk/counter_machine.hpp"
#include "rwalk/kernel.hpp"
#include "rwalk/lyapunov.hpp"
#include "rwalk/manifest.hpp"
#include "rwalk/queueing.hpp"
#include "rwalk/reduction.hpp"
#include "rwalk/stationary.hpp"

using namespace rwalk;
using nlohmann::json;

namespace {

struct Global {
  std::string format = "csv";  // csv | json-lines
  bool quiet = false;
  std::vector<std::string> argv;
  std::map<std::string, std::string> input_digests;
  std::optional<std::uint64_t> seed;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

Global g;

void note(const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

std::string slurp_input(const std::string& path) {
  std::string text = read_file(path);
  g.input_digests[path] = sha256_hex(text);
  return text;
}

TransitionKernel input_kernel(const std::string& path) {
  return parse_kernel(slurp_input(path), path);
}

cm::CounterMachine input_machine(const std::string& path) {
  return cm::parse_machine(slurp_input(path), path);
}

RunManifest manifest() {
  RunManifest m;
  m.command_line = g.argv;
  m.input_digests = g.input_digests;
  m.seed = g.seed;
  m.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - g.started).count();
  return m;
}

void emit_output(const std::string& path, const std::string& content) {
  write_file(path, content);
  write_manifest_for(path, manifest());
  note("wrote " + path);
}

// rows as (column -> value); csv keeps the given column order
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::ostringstream os;
    if (g.format == "json-lines") {
      for (const auto& row : rows) {
        json line;
        for (std::size_t c = 0; c < columns.size(); ++c) line[columns[c]] = row[c];
        os << line.dump() << "\n";
      }
    } else {
      for (std::size_t c = 0; c < columns.size(); ++c)
        os << (c ? "," : "") << columns[c];
      os << "\n";
      for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
        os << "\n";
      }
    }
    return os.str();
  }
};

void print_or_save(const Table& table, const std::string& out_path) {
  std::string body = table.render();
  if (out_path.empty())
    std::cout << body;
  else
    emit_output(out_path, body);
}

WalkState parse_state(const std::string& text, int dimension) {
  if (text == "origin" || text == "0...0") return origin_state(dimension);
  WalkState q;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) q.push_back(std::stoll(tok));
  if (static_cast<int>(q.size()) != dimension)
    throw CLI::ValidationError("state '" + text + "' has " + std::to_string(q.size()) +
                               " coordinates, kernel expects " + std::to_string(dimension));
  for (long long c : q)
    if (c < 0) throw CLI::ValidationError("state coordinates must be nonnegative");
  return q;
}

std::vector<long long> parse_direction(const std::string& text) {
  std::vector<long long> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stoll(tok));
  return v;
}

std::string csv_state(const WalkState& q) {
  std::string s;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i) s += " ";
    s += std::to_string(q[i]);
  }
  return s;
}

int run_walk_validate(const std::string& kernel_path) {
  auto kernel = input_kernel(kernel_path);
  auto report = validate_kernel(kernel);
  std::cout << report.to_string(kernel.dimension);
  return report.valid() ? 0 : 1;
}

int run_walk_simulate(const std::string& kernel_path, const std::string& start_text,
                      long long horizon, std::uint64_t seed, const std::string& out_path) {
  auto kernel = input_kernel(kernel_path);
  auto report = validate_kernel(kernel);
  if (!report.valid()) {
    std::cout << report.to_string(kernel.dimension);
    return 1;
  }
  g.seed = seed;
  auto traj = simulate(kernel, parse_state(start_text, kernel.dimension), horizon, seed);
  Table table;
  table.columns = {"t"};
  for (int i = 0; i < kernel.dimension; ++i) table.columns.push_back("c" + std::to_string(i + 1));
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (long long c : traj.states[t]) row.push_back(std::to_string(c));
    table.rows.push_back(std::move(row));
  }
  print_or_save(table, out_path);
  return 0;
}

int run_cm(const std::string& machine_path, const std::string& start_text, long long max_steps) {
  auto machine = input_machine(machine_path);
  cm::Configuration start;
  {
    std::stringstream ss(start_text);
    std::string state, z1, z2;
    if (!std::getline(ss, state, ',') || !std::getline(ss, z1, ',') || !std::getline(ss, z2, ','))
      throw CLI::ValidationError("--start must look like s0,0,0");
    start.state = machine.state_index(state);
    start.z1 = std::stoll(z1);
    start.z2 = std::stoll(z2);
  }
  auto result = cm::cm_run(machine, start, max_steps);
  if (std::holds_alternative<cm::Halted>(result)) {
    std::cout << "halted T=" << std::get<cm::Halted>(result).steps << "\n";
  } else {
    const auto& running = std::get<cm::Running>(result);
    std::cout << "running after " << running.steps << " steps: ("
              << machine.state_names[static_cast<std::size_t>(running.last.state)] << ","
              << running.last.z1 << "," << running.last.z2 << ")\n";
  }
  return 0;
}

int run_compile(const std::string& machine_path, const std::string& p_text, bool with_q3,
                const std::string& C_text, bool strict_steps, bool deterministic,
                const std::string& out_path) {
  auto machine = input_machine(machine_path);
  if (deterministic) {
    auto kernel = compile_deterministic(machine);
    emit_output(out_path, serialize_kernel(kernel));
    return 0;
  }
  Rat p = parse_rational(p_text);
  if (p <= Rat(0) || p >= Rat(1)) {
    std::cerr << "error: p outside (0,1)\n";
    return 2;
  }
  std::optional<Rat> C;
  if (!C_text.empty()) C = parse_rational(C_text);
  auto walk = compile_extended(machine, p, with_q3, C, strict_steps);
  emit_output(out_path, serialize_kernel(walk.kernel));
  emit_output(out_path + ".cert.json", serialize_certificate(walk.lyapunov));
  return 0;
}

int run_lyapunov_linear(const std::string& kernel_path, const std::string& w_path,
                        const std::string& gamma_text) {
  auto kernel = input_kernel(kernel_path);
  auto w = lyapunov::load_weight_vector(w_path, kernel.dimension);
  g.input_digests[w_path] = sha256_file_hex(w_path);
  auto check = lyapunov::check_linear(kernel, w, parse_rational(gamma_text));
  if (check.pass) {
    std::cout << "linear drift check: PASS\n";
    return 0;
  }
  std::cout << "linear drift check: FAIL at face "
            << face_to_string(*check.worst_face, kernel.dimension) << " with drift "
            << format_rational(*check.worst_drift) << "\n";
  return 1;
}

int run_lyapunov_geometric(const std::string& kernel_path, const std::string& w_path,
                           const std::string& gamma_text, const std::string& out_path) {
  auto kernel = input_kernel(kernel_path);
  auto w = lyapunov::load_weight_vector(w_path, kernel.dimension);
  g.input_digests[w_path] = sha256_file_hex(w_path);
  auto cert = lyapunov::geometric_from_linear(kernel, w, parse_rational(gamma_text));
  std::cout << "delta=" << cert.delta << " gamma_g=" << cert.gamma_g << "\n";
  if (!out_path.empty()) emit_output(out_path, lyapunov::serialize_geometric(cert));
  return 0;
}

int run_lyapunov_mixing(const std::string& kernel_path, const std::string& cert_path) {
  auto kernel = input_kernel(kernel_path);
  auto cert = lyapunov::parse_geometric(slurp_input(cert_path), cert_path);
  auto inputs = lyapunov::mixing_inputs(kernel, cert);
  std::cout << "nu=" << inputs.nu << " p_B_min=" << format_rational(inputs.p_B_min)
            << " gamma_g=" << inputs.gamma_g << " b_max=" << inputs.b_max << "\n";
  if (!inputs.p_B_min_positive)
    note("warning: p_B_min = 0, the mixing bounds are vacuous for this exception set");
  return 0;
}

int run_stationary_return(const std::string& kernel_path, const std::string& target_text,
                          const std::string& mode, long long horizon, long long episodes,
                          std::uint64_t seed, const std::string& out_path) {
  auto kernel = input_kernel(kernel_path);
  auto target = parse_state(target_text, kernel.dimension);
  g.seed = seed;
  auto report = stationary::return_time(
      kernel, target, horizon,
      mode == "mc" ? stationary::ReturnMode::MonteCarlo : stationary::ReturnMode::Exact, episodes,
      seed);
  Table table;
  table.columns = {"steps", "mass"};
  for (const auto& [steps, mass] : report.pmf_prefix)
    table.rows.push_back({std::to_string(steps), format_rational(mass)});
  print_or_save(table, out_path);
  std::cout << "tail_mass = " << format_rational(report.tail_mass) << "\n";
  std::cout << "mean_lower = " << format_rational(report.mean_lower) << "\n";
  if (report.mean_exact) {
    std::cout << "mean_exact = " << format_rational(*report.mean_exact)
              << (report.analytic_tail ? " (geometric tail closed analytically)" : "") << "\n";
    std::cout << "pi(" << csv_state(target) << ") = " << format_rational(*report.pi_estimate)
              << "\n";
  }
  if (report.mc_mean) {
    std::cout << "mc_mean = " << *report.mc_mean << " stderr = " << *report.mc_stderr
              << " episodes = " << report.mc_episodes << " censored = " << report.mc_censored
              << "\n";
  }
  return 0;
}

int run_stationary_solve(const std::string& kernel_path, const std::string& seed_text,
                         const std::string& out_path) {
  auto kernel = input_kernel(kernel_path);
  auto seed_state = parse_state(seed_text, kernel.dimension);
  auto solution = stationary::solve_stationary_exact(kernel, seed_state);
  Table table;
  table.columns = {"state", "pi"};
  for (const auto& [state, pi] : solution.pi)
    table.rows.push_back({csv_state(state), format_rational(pi)});
  print_or_save(table, out_path);
  std::cout << "class_size = " << solution.class_size << "\n";
  std::cout << "pi(" << csv_state(seed_state)
            << ") = " << format_rational(solution.pi.at(seed_state)) << "\n";
  return 0;
}

int run_stationary_approx(const std::string& kernel_path, const std::string& cert_path,
                          double R, double rho, const std::string& x0_text, double epsilon,
                          bool heuristic, const std::string& start_text) {
  auto kernel = input_kernel(kernel_path);
  auto cert = lyapunov::parse_geometric(slurp_input(cert_path), cert_path);
  stationary::ApproxOptions opts;
  opts.epsilon = epsilon;
  if (!heuristic) {
    if (R <= 0 || rho <= 0) {
      std::cerr << "error: certified mode needs --R and --rho (or pass --heuristic)\n";
      return 2;
    }
    opts.R = R;
    opts.rho = rho;
  }
  auto x0 = parse_state(x0_text, kernel.dimension);
  auto start = parse_state(start_text, kernel.dimension);
  auto res = stationary::approx_stationary(kernel, cert, x0, start, opts);
  std::cout << "interval = [" << res.lower << ", " << res.upper << "]"
            << (res.certified ? "" : "  NON-CERTIFIED (heuristic constants)") << "\n";
  std::cout << "p_hat = " << res.p_hat << " t = " << res.t_star << " period = " << res.period
            << " R = " << res.R << " rho = " << res.rho << "\n";
  return 0;
}

int run_ldrate(const std::string& kernel_path, const std::string& v_text, long long n_max,
               const std::string& out_path) {
  auto kernel = input_kernel(kernel_path);
  auto v = parse_direction(v_text);
  if (static_cast<int>(v.size()) != kernel.dimension)
    throw CLI::ValidationError("direction length must equal the kernel dimension");
  stationary::LdrOptions opts;
  opts.n_max = n_max;
  auto report = stationary::ldrate(kernel, v, opts);
  Table table;
  table.columns = {"n", "pi", "log_pi_over_n"};
  for (const auto& point : report.points) {
    std::ostringstream lp;
    lp << point.log_pi_over_n;
    table.rows.push_back({std::to_string(point.n), format_rational(point.pi), lp.str()});
  }
  print_or_save(table, out_path);
  if (report.infinite_rate)
    std::cout << "rate = +infinity (pi vanishes from n = " << report.zero_from_n << " on)\n";
  if (report.slope_estimate) std::cout << "slope_estimate = " << *report.slope_estimate << "\n";
  if (report.L_minus) std::cout << "L_minus ~= " << *report.L_minus << "\n";
  if (report.L_plus) std::cout << "L_plus ~= " << *report.L_plus << "\n";
  return 0;
}

int run_queue_load(const std::string& spec_path) {
  auto spec = queueing::parse_queue_spec(slurp_input(spec_path), spec_path);
  auto report = queueing::load_factor(spec.system);
  std::cout << "rho = " << format_rational(report.rho) << "\n";
  std::cout << "stable_necessary = " << (report.stable_necessary ? "true" : "false") << "\n";
  return 0;
}

int run_queue_sim(const std::string& spec_path, long long horizon, std::uint64_t seed) {
  auto spec = queueing::parse_queue_spec(slurp_input(spec_path), spec_path);
  g.seed = seed;
  auto stats = queueing::queue_simulate(spec.system, spec.policy, horizon, seed);
  std::cout << "epochs = " << stats.epochs << "\n";
  std::cout << "empty_epoch_fraction = " << stats.empty_epoch_fraction << "\n";
  for (std::size_t b = 0; b < stats.mean_occupancy.size(); ++b)
    std::cout << "mean_occupancy[B" << (b + 1) << "] = " << stats.mean_occupancy[b] << "\n";
  std::cout << "arrivals = " << stats.total_arrivals << " departures = " << stats.total_departures
            << "\n";
  return 0;
}

int run_queue_embed(const std::string& spec_path, bool analyze) {
  auto spec = queueing::parse_queue_spec(slurp_input(spec_path), spec_path);
  auto chain = queueing::embedded_chain(spec.system, spec.policy);
  WalkState empty(static_cast<std::size_t>(spec.system.total_buffers()), 0);
  Table table;
  table.columns = {"state", "next", "prob"};
  for (const auto& [next, prob] : chain.successors(empty))
    table.rows.push_back({csv_state(empty), csv_state(next), format_rational(prob)});
  print_or_save(table, "");
  if (analyze) {
    auto solution = stationary::solve_stationary_exact(chain, empty);
    std::cout << "class_size = " << solution.class_size << "\n";
    std::cout << "pi(empty) = " << format_rational(solution.pi.at(empty)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g.argv.push_back(argv[i]);

  CLI::App app{"constrained random walks on the orthant: compile, verify, analyze"};
  app.require_subcommand(1);
  app.add_option("--format", g.format, "output format: csv or json-lines")
      ->check(CLI::IsMember({"csv", "json-lines"}));
  app.add_flag("--quiet", g.quiet, "suppress progress notes on stderr");
  app.failure_message(CLI::FailureMessage::help);

  std::string kernel_path, machine_path, spec_path, out_path, start_text = "origin";
  std::string target_text = "origin", seed_text = "origin", x0_text = "origin";
  std::string p_text = "1/2", C_text, gamma_text = "1", w_path, cert_path, v_text, mode = "exact";
  long long horizon = 1000, max_steps = 1000, episodes = 100000, n_max = 8;
  std::uint64_t seed = 0;
  double R = 0, rho = 0, epsilon = 1e-3;
  bool with_q3 = false, strict_steps = false, deterministic = false, heuristic = false,
       analyze = false;

  auto* walk = app.add_subcommand("walk", "validate and simulate kernels");
  auto* wv = walk->add_subcommand("validate", "check every kernel invariant; exit 1 on violations");
  wv->add_option("kernel", kernel_path)->required();
  auto* ws = walk->add_subcommand("simulate",
                                  "sample one trajectory; csv columns: t,c1..cd");
  ws->add_option("kernel", kernel_path)->required();
  ws->add_option("--start", start_text, "comma-separated coordinates or 'origin'");
  ws->add_option("--horizon", horizon)->required();
  ws->add_option("--seed", seed)->required();
  ws->add_option("--out", out_path, "write csv (plus manifest) here instead of stdout");

  auto* cmc = app.add_subcommand("cm", "run counter machines");
  auto* cmr = cmc->add_subcommand("run", "run a machine; reports halted T or the last configuration");
  cmr->add_option("machine", machine_path)->required();
  cmr->add_option("--start", start_text, "configuration like s0,0,0")->required();
  cmr->add_option("--max-steps", max_steps)->required();

  auto* comp = app.add_subcommand("compile", "embed a counter machine into a walk kernel");
  comp->add_option("machine", machine_path)->required();
  comp->add_option("--p", p_text, "Bernoulli survival parameter, rational in (0,1)");
  comp->add_flag("--with-q3", with_q3, "append the ray coordinate");
  comp->add_option("--C", C_text, "survival-bit certificate weight (defaults to the drift bound)");
  comp->add_flag("--strict-steps", strict_steps, "split the +-2 coordinate into a strict pair");
  comp->add_flag("--deterministic", deterministic, "emit the deterministic embedding only");
  comp->add_option("-o,--out", out_path)->required();

  auto* lyap = app.add_subcommand("lyapunov", "drift condition checks");
  auto* ll = lyap->add_subcommand("linear", "exact linear drift check");
  ll->add_option("kernel", kernel_path)->required();
  ll->add_option("--w", w_path, "weight vector file, whitespace-separated rationals")->required();
  ll->add_option("--gamma", gamma_text);
  auto* lg = lyap->add_subcommand("geometric", "derive a geometric certificate from linear weights");
  lg->add_option("kernel", kernel_path)->required();
  lg->add_option("--from-linear", w_path, "weight vector file")->required();
  lg->add_option("--gamma", gamma_text);
  lg->add_option("-o,--out", out_path, "write the certificate json here");
  auto* lm = lyap->add_subcommand("mixing-inputs", "constants feeding the mixing-time bounds");
  lm->add_option("kernel", kernel_path)->required();
  lm->add_option("--cert", cert_path, "geometric certificate json")->required();

  auto* stat = app.add_subcommand("stationary", "return times and stationary masses");
  auto* sr = stat->add_subcommand("return",
                                  "first-return distribution; csv columns: steps,mass");
  sr->add_option("kernel", kernel_path)->required();
  sr->add_option("--target", target_text);
  sr->add_option("--mode", mode)->check(CLI::IsMember({"exact", "mc"}));
  sr->add_option("--horizon", horizon);
  sr->add_option("--episodes", episodes);
  sr->add_option("--seed", seed);
  sr->add_option("--out", out_path);
  auto* ss = stat->add_subcommand("solve",
                                  "exact stationary masses on a finite class; csv: state,pi");
  ss->add_option("kernel", kernel_path)->required();
  ss->add_option("--seed-state", seed_text);
  ss->add_option("--out", out_path);
  auto* sa = stat->add_subcommand("approx", "two-sided interval for pi(x0)");
  sa->add_option("kernel", kernel_path)->required();
  sa->add_option("--cert", cert_path, "geometric certificate json")->required();
  sa->add_option("--R", R);
  sa->add_option("--rho", rho);
  sa->add_option("--x0", x0_text);
  sa->add_option("--start", start_text);
  sa->add_option("--epsilon", epsilon);
  sa->add_flag("--heuristic", heuristic, "fit (R, rho) from early decay; flags NON-CERTIFIED");

  auto* ld = app.add_subcommand("ldrate",
                                "stationary decay along a ray; csv: n,pi,log_pi_over_n");
  ld->add_option("kernel", kernel_path)->required();
  ld->add_option("--v", v_text, "direction, comma-separated nonnegative integers")->required();
  ld->add_option("--n-max", n_max);
  ld->add_option("--out", out_path);

  auto* queue = app.add_subcommand("queue", "slotted single-station priority queue");
  auto* ql = queue->add_subcommand("load", "exact load factor");
  ql->add_option("spec", spec_path)->required();
  auto* qs = queue->add_subcommand("sim", "slot-level simulation, epoch statistics");
  qs->add_option("spec", spec_path)->required();
  qs->add_option("--horizon", horizon, "number of epochs")->required();
  qs->add_option("--seed", seed)->required();
  auto* qe = queue->add_subcommand("embed",
                                   "one-block transitions of the epoch chain; csv: state,next,prob");
  qe->add_option("spec", spec_path)->required();
  qe->add_flag("--analyze", analyze, "also solve the epoch chain exactly");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      app.exit(e);
      return 0;
    }
    app.exit(e);
    return 2;
  }

  try {
    if (wv->parsed()) return run_walk_validate(kernel_path);
    if (ws->parsed()) return run_walk_simulate(kernel_path, start_text, horizon, seed, out_path);
    if (cmr->parsed()) return run_cm(machine_path, start_text, max_steps);
    if (comp->parsed())
      return run_compile(machine_path, p_text, with_q3, C_text, strict_steps, deterministic,
                         out_path);
    if (ll->parsed()) return run_lyapunov_linear(kernel_path, w_path, gamma_text);
    if (lg->parsed()) return run_lyapunov_geometric(kernel_path, w_path, gamma_text, out_path);
    if (lm->parsed()) return run_lyapunov_mixing(kernel_path, cert_path);
    if (sr->parsed())
      return run_stationary_return(kernel_path, target_text, mode, horizon, episodes, seed,
                                   out_path);
    if (ss->parsed()) return run_stationary_solve(kernel_path, seed_text, out_path);
    if (sa->parsed())
      return run_stationary_approx(kernel_path, cert_path, R, rho, x0_text, epsilon, heuristic,
                                   start_text);
    if (ld->parsed()) return run_ldrate(kernel_path, v_text, n_max, out_path);
    if (ql->parsed()) return run_queue_load(spec_path);
    if (qs->parsed()) return run_queue_sim(spec_path, horizon, seed);
    if (qe->parsed()) return run_queue_embed(spec_path, analyze);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "unknown command\n";
  return 2;
}
