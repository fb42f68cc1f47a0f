#include <doctest.h>

#include <cmath>

#include "rwalk/lyapunov.hpp"
#include "rwalk/reduction.hpp"
#include "testutil.hpp"

using namespace rwalk;
using namespace rwalk::lyapunov;
namespace tu = rwalk::testutil;

TEST_CASE("linear drift on the birth-death kernel") {
  auto k = tu::birth_death();
  auto pass = check_linear(k, {Rat(1)}, Rat(1));
  CHECK(pass.pass);
  CHECK(pass.face_drift.at(1) == Rat(-1));

  TransitionKernel up = k;
  up.rules[1] = {Rule{{+1}, Rat(1)}};
  auto fail = check_linear(up, {Rat(1)}, Rat(1));
  CHECK_FALSE(fail.pass);
  CHECK(*fail.worst_face == FaceMask{1});
  CHECK(*fail.worst_drift == Rat(1));
}

TEST_CASE("linear drift rejects mismatched or negative weights") {
  auto k = tu::birth_death();
  CHECK_THROWS_AS(check_linear(k, {Rat(1), Rat(1)}, Rat(1)), std::invalid_argument);
  CHECK_THROWS_AS(check_linear(k, {Rat(-1)}, Rat(1)), std::invalid_argument);
}

TEST_CASE("geometric drift on the birth-death kernel, closed form and samples") {
  auto k = tu::birth_death();
  GeometricCertificate cert;
  cert.delta = 1.0;
  cert.w = {Rat(1)};
  cert.gamma_g = 0.5;
  cert.exception_set.push_back({0});

  std::vector<WalkState> samples{{1}, {2}, {7}};
  auto check = check_geometric(k, cert, &samples);
  CHECK(check.pass);
  CHECK(check.face_ratio.at(1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  cert.gamma_g = 0.3;
  auto tight = check_geometric(k, cert);
  CHECK_FALSE(tight.pass);
  CHECK(*tight.worst_face == FaceMask{1});
  CHECK(tight.worst_ratio == doctest::Approx(std::exp(-1.0)));

  cert.delta = 0.0;
  cert.gamma_g = 0.99;
  auto degenerate = check_geometric(k, cert);
  CHECK_FALSE(degenerate.pass);
  CHECK(degenerate.worst_ratio == doctest::Approx(1.0));
}

TEST_CASE("geometric certificates derived from linear ones re-verify") {
  auto k = tu::birth_death();
  auto cert = geometric_from_linear(k, {Rat(1)}, Rat(1));
  CHECK(cert.delta > 0);
  CHECK(cert.gamma_g < 1);
  CHECK(cert.gamma_g == doctest::Approx(std::exp(-cert.delta)).epsilon(1e-9));
  CHECK(check_geometric(k, cert).pass);

  auto walk = compile_extended(tu::non_halting_machine(), Rat(1, 2), false);
  auto wcert = geometric_from_linear(walk.kernel, walk.lyapunov.w, Rat(1));
  CHECK(wcert.gamma_g < 1);
  CHECK(check_geometric(walk.kernel, wcert).pass);
}

TEST_CASE("a kernel that never moves admits no contracting delta") {
  TransitionKernel k;
  k.dimension = 1;
  k.rules[1] = {Rule{{0}, Rat(1)}};
  CHECK_THROWS_WITH_AS(geometric_from_linear(k, {Rat(1)}, Rat(0)),
                       doctest::Contains("no contracting delta"), std::runtime_error);
}

TEST_CASE("mixing inputs on the birth-death kernel") {
  auto k = tu::birth_death();
  GeometricCertificate cert;
  cert.delta = 1.0;
  cert.w = {Rat(1)};
  cert.gamma_g = 0.5;
  cert.exception_set.push_back({0});

  auto inputs = mixing_inputs(k, cert);
  CHECK(inputs.nu == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(inputs.p_B_min == Rat(0));  // no origin self-loop
  CHECK_FALSE(inputs.p_B_min_positive);

  TransitionKernel lazy = k;
  lazy.rules[0] = {Rule{{+1}, Rat(1, 2)}, Rule{{0}, Rat(1, 2)}};
  auto lazy_inputs = mixing_inputs(lazy, cert);
  CHECK(lazy_inputs.p_B_min == Rat(1, 2));
  CHECK(lazy_inputs.p_B_min_positive);

  cert.delta = 1e-9;
  cert.gamma_g = 1.0 - 1e-12;
  auto flat = mixing_inputs(lazy, cert);
  CHECK(flat.nu == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("geometric certificate files round-trip") {
  auto k = tu::birth_death();
  auto cert = geometric_from_linear(k, {Rat(1)}, Rat(1));
  auto reloaded = parse_geometric(serialize_geometric(cert), "mem");
  CHECK(reloaded.delta == cert.delta);
  CHECK(reloaded.gamma_g == cert.gamma_g);
  CHECK(reloaded.w == cert.w);
  CHECK(reloaded.exception_set == cert.exception_set);
}
