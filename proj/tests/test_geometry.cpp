#include <cmath>

#include "doctest.h"
#include "qpos/error.hpp"
#include "qpos/geometry.hpp"
#include "qpos/hermitian_core.hpp"
#include "support/random.hpp"

using namespace qpos;
using namespace qpos::geometry;
using qtest::Rng;

namespace {

ChartPoint affine(const CVector& z) { return ChartPoint{-1, z}; }

// hess(j, k) of log(1 + |z|^2), worked by hand.
CMatrix fubini_study(const CVector& z) {
  const double s = 1.0 + z.squaredNorm();
  const int n = static_cast<int>(z.size());
  return (s * CMatrix::Identity(n, n) - z * z.adjoint()) / (s * s);
}

Domain mu_quadric() { return Domain::quadric(3, 2, {2.0, 2.0, -0.5, -0.5}); }

// Sampling built by hand: one sample per Levi matrix, all neighbors of each
// other within a component.
BoundarySampling synthetic(const std::vector<HermitianMatrix>& levis, const std::vector<int>& comp) {
  BoundarySampling s;
  const int n = levis[0].dim() + 1;
  for (std::size_t i = 0; i < levis.size(); ++i) {
    BoundarySample b;
    b.id = "b" + std::to_string(i);
    b.levi = levis[i];
    b.embed = {static_cast<double>(i)};
    b.frame = boundary_frame(CVector::Unit(n, n - 1));
    s.samples.push_back(b);
    s.component.push_back(comp[i]);
    s.n_components = std::max(s.n_components, comp[i] + 1);
  }
  s.adjacency.resize(levis.size());
  for (std::size_t i = 0; i < levis.size(); ++i) {
    for (std::size_t j = 0; j < levis.size(); ++j) {
      if (i != j && comp[i] == comp[j]) s.adjacency[i].push_back(j);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("jets reproduce hand-computed complex Hessians") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const CVector z = qtest::gaussian(rng, 3, 1);
    const Jet f = log(constant_jet(3, 1.0) + quadratic_jet(CMatrix::Identity(3, 3), z));
    CHECK(max_abs(f.hess - fubini_study(z)) < 1e-13);
    CHECK(max_abs(f.grad - z / (1.0 + z.squaredNorm())) < 1e-14);
  }
}

TEST_CASE("sum of |z_j|^2 gives an identity block and Re(z1) gives zero") {
  const int n = 4, m = 2;
  CMatrix d = CMatrix::Zero(n, n);
  d.topLeftCorner(m, m).setIdentity();
  Rng rng(5);
  const CVector z = qtest::gaussian(rng, n, 1);
  const Jet f = quadratic_jet(d, z);
  CHECK(max_abs(f.hess - d) == 0.0);
  const Inertia in = core::inertia(f.hessian());
  CHECK(in.n_plus == m);
  CHECK(in.n_zero == n - m);

  CVector a = CVector::Zero(n);
  a(0) = 1.0;
  const Jet re = real_linear_jet(a, z);
  CHECK(re.value == doctest::Approx(z(0).real()));
  CHECK(max_abs(re.hess) == 0.0);
  const auto fd = complex_hessian_fd([](const CVector& y) { return y(0).real(); }, z);
  CHECK(max_abs(fd.matrix()) < 1e-8);
}

TEST_CASE("finite-difference Hessians agree with jets on the built-in domains") {
  Rng rng(7);
  const std::vector<Domain> domains = {Domain::ball(3), mu_quadric(), Domain::mqn(3, 2), Domain::product(3, 2)};
  for (const auto& d : domains) {
    SampleOptions so;
    so.samples = 20;
    so.seed = 11;
    const auto s = sample_boundary(d, so);
    for (const auto& smp : s.samples) {
      for (int which = 0; which < 2; ++which) {
        const Jet j = which == 0 ? rho_jet(d, smp.point) : exhaustion_jet(d, smp.point);
        const auto fd = complex_hessian_fd(
            [&](const CVector& z) {
              ChartPoint p = smp.point;
              p.z = z;
              return which == 0 ? rho_jet(d, p).value : exhaustion_jet(d, p).value;
            },
            smp.point.z);
        CHECK(op_norm(fd.matrix() - j.hess) / std::max(1.0, j.hessian().norm()) <= 1e-6);
      }
    }
  }
}

TEST_CASE("M_q^n weight: inertia (n-q+1, q-1, 0) off S and vanishing negatives on S") {
  for (auto [n, q] : std::vector<std::pair<int, int>>{{3, 2}, {4, 3}, {4, 2}, {2, 1}}) {
    const auto rep = mqn_inertia_check(n, q, 300, 17);
    CAPTURE(n);
    CAPTURE(q);
    CHECK(rep.inertia_ok == rep.samples);
    CHECK(rep.s_ok == rep.s_samples);
    CHECK(rep.s_max_negative <= 1e-8);
    CHECK(rep.fd_max_rel <= 1e-6);
    CHECK(rep.overlap_checked > 0);
    CHECK(rep.overlap_max_gap <= 1e-8);
    CHECK(rep.passed());
  }
}

TEST_CASE("boundary frame spans ker drho and is orthonormal") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const int n = qtest::uniform_int(rng, 2, 5);
    const CVector b = qtest::gaussian(rng, n, 1);
    const auto f = boundary_frame(b);
    CHECK(max_abs(f.tangent.adjoint() * f.tangent - CMatrix::Identity(n - 1, n - 1)) < 1e-12);
    CHECK((b.adjoint() * f.tangent).cwiseAbs().maxCoeff() < 1e-12 * b.norm());
    CHECK(std::abs(f.transverse.norm() - 1.0) < 1e-14);
  }
  CHECK_THROWS_AS(boundary_frame(CVector::Zero(3)), Error);
  try {
    boundary_frame(1e-7 * CVector::Ones(2));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FrameInvalid);
  }
  auto f = boundary_frame(CVector::Ones(3));
  f.tangent.col(0) += 1e-6 * f.transverse;
  try {
    levi_form(HermitianMatrix::identity(3), f);
    FAIL("expected FrameInvalid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FrameInvalid);
  }
}

TEST_CASE("unit ball in C^2: Levi form is [1]") {
  SampleOptions so;
  so.samples = 200;
  const auto s = sample_boundary(Domain::ball(2), so);
  for (const auto& smp : s.samples) {
    CHECK(std::abs(smp.point.z.norm() - 1.0) < 1e-13);
    CHECK(smp.levi.dim() == 1);
    CHECK(std::abs(smp.levi.matrix()(0, 0) - 1.0) < 1e-12);
  }
  CHECK(s.n_components == 1);
}

TEST_CASE("Levi form scales with the defining function") {
  SampleOptions so;
  so.samples = 100;
  so.seed = 2;
  for (const auto& d : {Domain::ball(3), mu_quadric()}) {
    const auto s = sample_boundary(d, so);
    for (const auto& smp : s.samples) {
      const Jet rho = rho_jet(d, smp.point);
      const int n = d.n;
      const Jet f = constant_jet(n, 1.0) + quadratic_jet(CMatrix::Identity(n, n), smp.point.z);
      const Jet rho2 = 2.0 * rho;
      const Jet rhof = f * rho;
      const auto l = levi_form(rho.hessian(), boundary_frame(rho.grad));
      // drho is a positive multiple at the boundary, so the same tangent frame serves.
      const auto l2 = levi_form(rho2.hessian(), boundary_frame(rho2.grad));
      const auto lf = levi_form(rhof.hessian(), boundary_frame(rhof.grad));
      CHECK(max_abs(l2.matrix() - 2.0 * l.matrix()) < 1e-12);
      CHECK(max_abs(lf.matrix() - f.value * l.matrix()) < 1e-10 * std::max(1.0, f.value));
      CHECK(core::inertia(l) == core::inertia(l2));
      CHECK(core::inertia(l) == core::inertia(lf));
    }
  }
}

TEST_CASE("quadric boundary: Levi inertia is one less than the sign counts of mu") {
  // The cone {w* D w = 0} has Levi signature (p - 1, m - 1) for p positive and
  // m negative entries of D.
  struct Case {
    int n, q;
    std::vector<double> mu;
    int plus, minus;
  };
  const std::vector<Case> cases = {
      {3, 2, {2.0, 2.0, -0.5, -0.5}, 1, 1},
      {3, 1, {2.0, 3.0, 1.5, -0.5}, 2, 0},
      {4, 3, {1.5, 4.0, -0.9, -0.2, 0.5}, 2, 1},
  };
  for (const auto& c : cases) {
    const Domain d = Domain::quadric(c.n, c.q, c.mu);
    SampleOptions so;
    so.samples = 150;
    so.seed = 4;
    const auto s = sample_boundary(d, so);
    for (const auto& smp : s.samples) {
      const Inertia in = core::inertia(smp.levi);
      CHECK(in.n_plus == c.plus);
      CHECK(in.n_minus == c.minus);
      CHECK(std::abs(smp.rho) < 1e-12);
    }
    const auto ov = chart_overlap_check(d, s, 64);
    CHECK(ov.checked > 0);
    CHECK(ov.max_value_gap <= 1e-8);
    CHECK(ov.inertia_mismatches == 0);
    CHECK(quadric_inclusion_violations(d, 2000, 9) == 0);
  }
}

TEST_CASE("quadric parameters are validated") {
  CHECK_THROWS_AS(Domain::quadric(3, 2, {2.0, 0.5, -0.5, -0.5}), Error);   // mu_2 <= 1
  CHECK_THROWS_AS(Domain::quadric(3, 2, {2.0, 2.0, -1.5, -0.5}), Error);   // mu_3 <= -1
  CHECK_THROWS_AS(Domain::quadric(3, 2, {2.0, 2.0, 0.5, 0.5}), Error);     // no negative entry
  CHECK_THROWS_AS(Domain::quadric(3, 2, {2.0, 2.0, -0.5}), Error);         // wrong length
  CHECK_THROWS_AS(Domain::quadric(3, 2, {2.0, 2.0, 0.0, -0.5}), Error);    // zero entry
}

TEST_CASE("zq_check: ball and quadric pass, a Levi-flat cylinder fails") {
  SampleOptions so;
  so.samples = 300;
  const auto ball = sample_boundary(Domain::ball(2), so);
  const auto zb = zq_check(ball, 2, 1);
  CHECK(zb.passed());
  for (const auto& z : zb.samples) CHECK(z.branch == 1);

  const auto quad = sample_boundary(mu_quadric(), so);
  const auto zq = zq_check(quad, 3, 2);
  CHECK(zq.passed());
  CHECK(zq.component_branch.size() == static_cast<std::size_t>(quad.n_components));

  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  const Domain cyl = Domain::custom(a, CVector::Zero(2), -1.0, 1.5);
  const auto cs = sample_boundary(cyl, so);
  const auto zc = zq_check(cs, 2, 1, false);
  CHECK_FALSE(zc.passed());
  CHECK(zc.failing.size() == cs.samples.size());
  for (const auto& z : zc.samples) CHECK(z.branch == 0);
  try {
    zq_check(cs, 2, 1);
    FAIL("expected ZqViolated");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZqViolated);
    CHECK(e.point_id() == "b0");
  }
}

TEST_CASE("zq_check and pipeline handle one branch per component") {
  // n = 3, q = 1: branch (i) needs two positive, branch (ii) two negative.
  const auto pos = HermitianMatrix::diagonal({1.0, 2.0});
  const auto neg = HermitianMatrix::diagonal({-1.0, -3.0});
  auto s = synthetic({pos, pos, pos, neg, neg}, {0, 0, 0, 1, 1});
  const auto z = zq_check(s, 3, 1);
  CHECK(z.component_branch == std::vector<int>{1, 2});
  const auto r = zq_metric_pipeline(s, 3, 1);
  CHECK(r.passed());
  CHECK(r.q_tilde == std::vector<int>{1, 1, 1, 1, 1});
  for (const auto& e : r.certificate.entries) CHECK(e.pass());

  // A component mixing the branches fails at the minority samples.
  auto mixed = synthetic({pos, pos, neg}, {0, 0, 0});
  const auto zm = zq_check(mixed, 3, 1, false);
  CHECK(zm.component_branch == std::vector<int>{0});
  CHECK(zm.failing == std::vector<std::string>{"b2"});
}

TEST_CASE("branch (ii) pipeline inflates the metric until -L is strictly (n-q-1)-positive") {
  // n = 5, q = 1: -L has 3 positive and 1 negative eigenvalue, q~ = 3.
  Rng rng(19);
  std::vector<HermitianMatrix> levis;
  for (int i = 0; i < 6; ++i) {
    RVector ev(4);
    ev << -1.0, -2.0, -0.5, 9.0;
    levis.emplace_back(qtest::with_spectrum(rng, ev));
  }
  auto s = synthetic(levis, {0, 0, 0, 0, 0, 0});
  const auto z = zq_check(s, 5, 1);
  CHECK(z.component_branch == std::vector<int>{2});
  const auto r = zq_metric_pipeline(s, 5, 1);
  CHECK(r.passed());
  for (std::size_t i = 0; i < levis.size(); ++i) {
    CHECK(r.q_tilde[i] == 3);
    CHECK(core::q_min_sum(-levis[i], r.metrics[i], 3) > 0.0);
    CHECK(core::q_min_sum(-levis[i], MetricMatrix::identity(4), 3) < 0.0);
  }
}

TEST_CASE("pipeline certificates on the ball, the quadric and a product domain") {
  SampleOptions so;
  so.samples = 400;
  so.seed = 23;
  {
    const auto s = sample_boundary(Domain::ball(2), so);
    const auto r = zq_metric_pipeline(s, 2, 1);
    CHECK(r.passed());
    for (const auto& m : r.metrics) CHECK(m == MetricMatrix::identity(1));
  }
  {
    const auto s = sample_boundary(mu_quadric(), so);
    const auto r = zq_metric_pipeline(s, 3, 2);
    CHECK(r.passed());
    CHECK(r.certificate.entries.size() == s.samples.size());
    CHECK(r.certificate.worst_margin() > 0.0);
    // The Levi form alone is not 2-positive: trace zero or less somewhere is
    // possible, but the synthesized metric fixes every sample.
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      CHECK(core::q_min_sum(s.samples[i].levi, r.metrics[i], 2) > 0.0);
    }
  }
  for (auto [n, q] : std::vector<std::pair<int, int>>{{3, 2}, {4, 3}, {4, 2}}) {
    const auto s = sample_boundary(Domain::product(n, q), so);
    const auto r = zq_metric_pipeline(s, n, q);
    CAPTURE(n);
    CAPTURE(q);
    CHECK(r.passed());
    for (const auto& smp : s.samples) {
      const Inertia in = core::inertia(smp.levi);
      CHECK(in.n_plus == n - q);
      CHECK(in.n_zero == q - 1);
    }
  }
}

TEST_CASE("sampling is deterministic across thread counts") {
  SampleOptions so;
  so.samples = 120;
  so.seed = 31;
  const auto a = sample_boundary(mu_quadric(), so);
  so.threads = 3;
  const auto b = sample_boundary(mu_quadric(), so);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].point.chart == b.samples[i].point.chart);
    CHECK(a.samples[i].point.z == b.samples[i].point.z);
    CHECK(a.adjacency[i] == b.adjacency[i]);
  }
}

TEST_CASE("finite-difference sampling mode matches analytic Levi forms") {
  Rng rng(37);
  const CMatrix a = qtest::random_pd(rng, 3, 0.5, 2.0);
  const CVector b = 0.2 * qtest::gaussian(rng, 3, 1);
  const Domain d = Domain::custom(a, b, -1.0, 3.0);
  SampleOptions so;
  so.samples = 40;
  const auto an = sample_boundary(d, so);
  so.mode = HessianMode::FiniteDifference;
  const auto fd = sample_boundary(d, so);
  for (std::size_t i = 0; i < an.samples.size(); ++i) {
    const double scale = std::max(1.0, an.samples[i].levi.norm());
    CHECK(max_abs(an.samples[i].levi.matrix() - fd.samples[i].levi.matrix()) / scale <= 1e-6);
  }
}

TEST_CASE("domain JSON round trip and schema errors") {
  for (const auto& d : {Domain::ball(3, 2.0), mu_quadric(), Domain::mqn(3, 2, 0.5), Domain::product(4, 2)}) {
    const auto j = domain_to_json(d);
    const Domain e = domain_from_json(j);
    CHECK(e.name() == d.name());
    CHECK(domain_to_json(e) == j);
  }
  auto kind_of = [](const nlohmann::ordered_json& j) {
    try {
      domain_from_json(j);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  CHECK(kind_of(nlohmann::ordered_json::parse(R"({"type": "torus"})")) == ErrorKind::SchemaError);
  CHECK(kind_of(nlohmann::ordered_json::parse(R"({"n": 2})")) == ErrorKind::SchemaError);
  CHECK(kind_of(nlohmann::ordered_json::parse(R"({"type": "quadric", "n": 3, "q": 2, "mu": [1, 1, -1, -1]})")) ==
        ErrorKind::SchemaError);
  CHECK(kind_of(nlohmann::ordered_json::parse(R"({"type": "ball", "n": "two"})")) == ErrorKind::SchemaError);
}
