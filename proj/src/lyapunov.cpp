#include "rwalk/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rwalk/manifest.hpp"

namespace rwalk::lyapunov {

namespace {

void require_weights(const TransitionKernel& kernel, const std::vector<Rat>& w) {
  if (static_cast<int>(w.size()) != kernel.dimension)
    throw std::invalid_argument("weight vector length " + std::to_string(w.size()) +
                                " does not match kernel dimension " +
                                std::to_string(kernel.dimension));
  for (const auto& x : w)
    if (x < Rat(0)) throw std::invalid_argument("weights must be nonnegative");
}

Rat dot_delta(const std::vector<Rat>& w, const std::vector<int>& delta) {
  Rat acc(0);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (delta[i] != 0) acc += w[i] * Rat(delta[i]);
  return acc;
}

// log of the face-wise moment sum_delta p * exp(s * w.delta), stable for
// large weights
double log_face_moment(const std::vector<Rule>& rules, const std::vector<Rat>& w, double s) {
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(rules.size());
  for (const auto& rule : rules) {
    double t = std::log(to_double(rule.prob)) + s * to_double(dot_delta(w, rule.delta));
    terms.push_back(t);
    hi = std::max(hi, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

}  // namespace

LinearCheck check_linear(const TransitionKernel& kernel, const std::vector<Rat>& w,
                         const Rat& gamma) {
  require_weights(kernel, w);
  LinearCheck result;
  result.pass = true;
  for (const auto& [face, rules] : kernel.rules) {
    if (face == 0 || rules.empty()) continue;  // the drift condition quantifies nonempty faces
    Rat drift(0);
    for (const auto& rule : rules) drift += rule.prob * dot_delta(w, rule.delta);
    result.face_drift[face] = drift;
    if (!result.worst_drift || drift > *result.worst_drift) {
      result.worst_face = face;
      result.worst_drift = drift;
    }
    if (!(drift <= -gamma)) result.pass = false;
  }
  return result;
}

double phi_g(const GeometricCertificate& cert, const WalkState& q) {
  Rat exponent(0);
  for (std::size_t i = 0; i < cert.w.size(); ++i) exponent += cert.w[i] * Rat(Int(q[i]));
  return std::exp(cert.delta * to_double(exponent));
}

GeometricCheck check_geometric(const TransitionKernel& kernel, const GeometricCertificate& cert,
                               const std::vector<WalkState>* sample_states) {
  require_weights(kernel, cert.w);
  GeometricCheck result;
  result.pass = true;
  for (const auto& [face, rules] : kernel.rules) {
    if (face == 0 || rules.empty()) continue;
    double ratio = std::exp(log_face_moment(rules, cert.w, cert.delta));
    result.face_ratio[face] = ratio;
    if (result.face_ratio.size() == 1 || ratio > result.worst_ratio) {
      result.worst_ratio = ratio;
      result.worst_face = face;
    }
    if (!(ratio <= cert.gamma_g)) result.pass = false;
  }
  if (sample_states) {
    // per-state expectation must agree with the face closed form
    for (const auto& q : *sample_states) {
      FaceMask face = face_of(q);
      const auto* rules = kernel.rules_for(face);
      if (face == 0 || rules == nullptr || rules->empty()) continue;
      double log_phi_q = cert.delta * [&] {
        Rat e(0);
        for (std::size_t i = 0; i < cert.w.size(); ++i) e += cert.w[i] * Rat(Int(q[i]));
        return to_double(e);
      }();
      double hi = -std::numeric_limits<double>::infinity();
      std::vector<double> terms;
      for (const auto& rule : *rules) {
        Rat e(0);
        for (std::size_t i = 0; i < cert.w.size(); ++i)
          e += cert.w[i] * Rat(Int(q[i] + rule.delta[i]));
        terms.push_back(std::log(to_double(rule.prob)) + cert.delta * to_double(e));
        hi = std::max(hi, terms.back());
      }
      double acc = 0.0;
      for (double t : terms) acc += std::exp(t - hi);
      double ratio = std::exp(hi + std::log(acc) - log_phi_q);
      if (std::abs(ratio - result.face_ratio.at(face)) >
          1e-12 * std::max(1.0, result.face_ratio.at(face)))
        throw std::logic_error("sampled ratio diverges from the face closed form at " +
                               state_to_string(q));
    }
  }
  return result;
}

GeometricCertificate geometric_from_linear(const TransitionKernel& kernel,
                                           const std::vector<Rat>& w, const Rat& gamma,
                                           double delta_hi, int iterations) {
  auto linear = check_linear(kernel, w, gamma);
  if (!linear.pass)
    throw std::invalid_argument("linear drift check fails; no geometric certificate follows");

  // gamma_g(delta) = max over nonempty faces of the moment, a max of convex
  // functions; ternary search, biased left so flat ties pick the smaller delta
  auto gamma_of = [&](double delta) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [face, rules] : kernel.rules) {
      if (face == 0 || rules.empty()) continue;
      worst = std::max(worst, log_face_moment(rules, w, delta));
    }
    return worst;  // log scale
  };

  double lo = 0.0, hi = delta_hi;
  for (int it = 0; it < iterations; ++it) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (gamma_of(m1) <= gamma_of(m2))
      hi = m2;
    else
      lo = m1;
  }
  double delta = (lo + hi) / 2.0;
  double log_gamma = gamma_of(delta);
  if (!(log_gamma < 0.0)) {
    std::ostringstream os;
    os << "no contracting delta in (0, " << delta_hi << "]: the face-wise moments stay >= 1 (";
    bool first = true;
    for (const auto& [face, rules] : kernel.rules) {
      if (face == 0 || rules.empty()) continue;
      if (!first) os << ", ";
      os << face_to_string(face, kernel.dimension) << " -> "
         << std::exp(log_face_moment(rules, w, delta));
      first = false;
    }
    os << ")";
    throw std::runtime_error(os.str());
  }

  GeometricCertificate cert;
  cert.delta = delta;
  cert.w = w;
  cert.gamma_g = std::exp(log_gamma);
  cert.exception_set.push_back(origin_state(kernel.dimension));
  double b = 0.0;
  for (const auto& q : cert.exception_set) {
    const auto* rules = kernel.rules_for(face_of(q));
    if (rules == nullptr || rules->empty()) continue;
    double expectation = 0.0;
    for (const auto& rule : *rules) {
      WalkState next = q;
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += rule.delta[i];
      expectation += to_double(rule.prob) * phi_g(cert, next);
    }
    b = std::max(b, expectation);
  }
  cert.b_max = b;
  return cert;
}

MixingInputs mixing_inputs(const TransitionKernel& kernel, const GeometricCertificate& cert) {
  auto check = check_geometric(kernel, cert);
  if (!check.pass)
    throw std::invalid_argument("certificate does not pass the geometric drift check");
  MixingInputs out;
  out.gamma_g = cert.gamma_g;

  double max_growth = -std::numeric_limits<double>::infinity();
  for (const auto& [face, rules] : kernel.rules)
    for (const auto& rule : rules)
      max_growth = std::max(max_growth, to_double(dot_delta(cert.w, rule.delta)));
  out.nu = std::exp(cert.delta * max_growth);

  bool first = true;
  for (const auto& x : cert.exception_set) {
    for (const auto& y : cert.exception_set) {
      Rat mass(0);
      for (const auto& [state, prob] : step_distribution(kernel, x))
        if (state == y) mass = prob;
      if (first || mass < out.p_B_min) out.p_B_min = mass;
      first = false;
    }
  }
  out.p_B_min_positive = out.p_B_min > Rat(0);

  double b = 0.0;
  for (const auto& q : cert.exception_set) {
    double expectation = 0.0;
    for (const auto& [state, prob] : step_distribution(kernel, q))
      expectation += to_double(prob) * phi_g(cert, state);
    b = std::max(b, expectation);
  }
  out.b_max = b;
  return out;
}

std::string serialize_geometric(const GeometricCertificate& cert) {
  nlohmann::json j;
  j["delta"] = cert.delta;
  nlohmann::json w = nlohmann::json::array();
  for (const auto& x : cert.w) w.push_back(format_rational(x));
  j["w"] = std::move(w);
  j["gamma_g"] = cert.gamma_g;
  j["b_max"] = cert.b_max;
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& s : cert.exception_set) {
    nlohmann::json arr = nlohmann::json::array();
    for (long long c : s) arr.push_back(c);
    ex.push_back(std::move(arr));
  }
  j["exception_set"] = std::move(ex);
  return j.dump(2) + "\n";
}

GeometricCertificate parse_geometric(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  GeometricCertificate cert;
  cert.delta = j.at("delta").get<double>();
  for (const auto& e : j.at("w")) cert.w.push_back(parse_rational(e.get<std::string>()));
  cert.gamma_g = j.at("gamma_g").get<double>();
  cert.b_max = j.value("b_max", 0.0);
  if (j.contains("exception_set")) {
    for (const auto& e : j["exception_set"]) {
      WalkState q;
      for (const auto& c : e) q.push_back(c.get<long long>());
      cert.exception_set.push_back(std::move(q));
    }
  }
  return cert;
}

GeometricCertificate load_geometric(const std::string& path) {
  return parse_geometric(read_file(path), path);
}

std::vector<Rat> load_weight_vector(const std::string& path, int dimension) {
  std::istringstream in(read_file(path));
  std::vector<Rat> w;
  std::string token;
  while (in >> token) w.push_back(parse_rational(token));
  if (static_cast<int>(w.size()) != dimension)
    throw std::runtime_error(path + ": expected " + std::to_string(dimension) +
                             " weights, found " + std::to_string(w.size()));
  return w;
}

}  // namespace rwalk::lyapunov
