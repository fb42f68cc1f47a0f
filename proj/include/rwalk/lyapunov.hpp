#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rwalk/kernel.hpp"
#include "rwalk/rational.hpp"

namespace rwalk::lyapunov {

// Linear drift check: for every nonempty materialized face,
// sum_delta (w . delta) p(face, delta) <= -gamma, exact rational comparison.
struct LinearCheck {
  bool pass = false;
  std::optional<FaceMask> worst_face;
  std::optional<Rat> worst_drift;
  std::map<FaceMask, Rat> face_drift;
};

LinearCheck check_linear(const TransitionKernel& kernel, const std::vector<Rat>& w,
                         const Rat& gamma);

// Phi_g(q) = exp(delta * w.q); the one-step expected ratio is face-constant.
struct GeometricCertificate {
  double delta = 0.0;
  std::vector<Rat> w;
  double gamma_g = 1.0;
  std::vector<WalkState> exception_set;
  double b_max = 0.0;  // max over the exception set of E[Phi_g(next)]
};

struct GeometricCheck {
  bool pass = false;
  std::optional<FaceMask> worst_face;
  double worst_ratio = 0.0;
  std::map<FaceMask, double> face_ratio;  // closed-form per-face ratios
};

// Closed-form face-wise check. `sample_states`, when given, additionally
// evaluates the per-state expectation on those states (log-space) and
// cross-checks it against the face value.
GeometricCheck check_geometric(const TransitionKernel& kernel, const GeometricCertificate& cert,
                               const std::vector<WalkState>* sample_states = nullptr);

// Searches delta in (0, delta_hi] for the largest margin 1 - gamma_g; ties
// resolve toward smaller delta. Throws if no delta contracts.
GeometricCertificate geometric_from_linear(const TransitionKernel& kernel,
                                           const std::vector<Rat>& w, const Rat& gamma,
                                           double delta_hi = 10.0, int iterations = 60);

struct MixingInputs {
  double nu = 1.0;      // max one-step multiplicative growth of Phi_g
  Rat p_B_min = Rat(0);
  double gamma_g = 1.0;
  double b_max = 1.0;
  bool p_B_min_positive = false;  // bounds are vacuous when false
};

MixingInputs mixing_inputs(const TransitionKernel& kernel, const GeometricCertificate& cert);

double phi_g(const GeometricCertificate& cert, const WalkState& q);

std::vector<Rat> load_weight_vector(const std::string& path, int dimension);

std::string serialize_geometric(const GeometricCertificate& cert);
GeometricCertificate parse_geometric(const std::string& text, const std::string& origin_name);
GeometricCertificate load_geometric(const std::string& path);

}  // namespace rwalk::lyapunov
