#include <cmath>

#include "doctest.h"
#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/metric_two_forms.hpp"
#include "support/random.hpp"

using namespace qpos;
using qtest::Rng;
using two_forms::PairState;

namespace {

const double kC = 1.0 - std::exp(-0.5);

PairState random_pair(Rng& rng, int d, double min_bound = 0.05) {
  while (true) {
    PairState p(HermitianMatrix(qtest::random_hermitian(rng, d)), HermitianMatrix(qtest::random_hermitian(rng, d)),
                MetricMatrix(qtest::random_pd(rng, d)));
    if (two_forms::common_direction_bound(p) > min_bound) return p;
  }
}

std::array<double, 2> random_in_O(Rng& rng, const PairState& p, double min_eig = 0.05) {
  while (true) {
    const std::array<double, 2> x{qtest::uniform(rng, -2.0, 2.0), qtest::uniform(rng, -2.0, 2.0)};
    const CMatrix g = two_forms::deformed_metric(p, x);
    const RVector ev = qtest::pencil_eigenvalues(g, p.base.matrix());
    if (ev(0) > min_eig) return x;
  }
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("common directions") {
  const PairState same(HermitianMatrix::identity(2), HermitianMatrix::identity(2));
  const auto w = two_forms::find_common_direction(same);
  REQUIRE(w);
  CHECK(w->norm() == doctest::Approx(1.0));

  const double a = 0.5;
  const PairState mixed(HermitianMatrix::diagonal({1.0, -a}), HermitianMatrix::diagonal({-a, 1.0}));
  const auto v = two_forms::find_common_direction(mixed);
  REQUIRE(v);
  CHECK(mixed.q1.value(*v) == doctest::Approx((1.0 - a) / 2.0).epsilon(1e-8));
  CHECK(mixed.q2.value(*v) == doctest::Approx((1.0 - a) / 2.0).epsilon(1e-8));
  CHECK(two_forms::common_direction_bound(mixed) == doctest::Approx(0.25).epsilon(1e-9));

  const PairState opposite(HermitianMatrix::identity(2), -HermitianMatrix::identity(2));
  CHECK_FALSE(two_forms::find_common_direction(opposite));
  CHECK(two_forms::common_direction_bound(opposite) <= 0.0);

  // The ascent reaches the dual bound on random pairs.
  Rng rng(51);
  for (int t = 0; t < 50; ++t) {
    const int d = qtest::uniform_int(rng, 2, 4);
    const PairState p(HermitianMatrix(qtest::random_hermitian(rng, d)), HermitianMatrix(qtest::random_hermitian(rng, d)));
    const double bound = two_forms::common_direction_bound(p);
    const auto wv = two_forms::find_common_direction(p, 16, t);
    if (bound > 1e-6) {
      REQUIRE(wv);
      CHECK(std::min(p.q1.value(*wv), p.q2.value(*wv)) >= bound - 1e-6);
    }
    if (bound < 0.0) CHECK_FALSE(wv);
    // Sampled vectors never beat the bound.
    for (int s = 0; s < 100; ++s) {
      const CVector u = qtest::unit_vector(rng, d);
      CHECK(std::min(p.q1.value(u), p.q2.value(u)) <= bound + 1e-9);
    }
  }
}

TEST_CASE("xi at the origin and on the identity pair") {
  Rng rng(52);
  const PairState p = random_pair(rng, 3);
  const auto e0 = two_forms::xi_eval(p, {0.0, 0.0});
  CHECK(e0.in_O);
  CHECK(std::abs(e0.xi) < 1e-14);
  CHECK(e0.grad[0] == doctest::Approx(core::trace_wrt(p.q1, p.base)));
  CHECK(e0.grad[1] == doctest::Approx(core::trace_wrt(p.q2, p.base)));

  const PairState same(HermitianMatrix::identity(2), HermitianMatrix::identity(2));
  for (auto x : {std::array<double, 2>{0.1, 0.2}, {-1.0, 0.5}, {0.3, 0.69}}) {
    const auto e = two_forms::xi_eval(same, x);
    CHECK(e.in_O);
    CHECK(e.xi == doctest::Approx(-2.0 * std::log(1.0 - x[0] - x[1])).epsilon(1e-13));
  }
  CHECK_FALSE(two_forms::xi_eval(same, {0.6, 0.6}).in_O);
}

TEST_CASE("xi derivatives against finite differences and traces") {
  Rng rng(53);
  const double h = 1e-6;
  for (int t = 0; t < 100; ++t) {
    const int d = qtest::uniform_int(rng, 2, 4);
    const PairState p = random_pair(rng, d);
    const auto x = random_in_O(rng, p);
    const auto e = two_forms::xi_eval(p, x);
    REQUIRE(e.in_O);
    for (int r = 0; r < 2; ++r) {
      auto xp = x, xm = x;
      xp[r] += h;
      xm[r] -= h;
      const auto ep = two_forms::xi_eval(p, xp), em = two_forms::xi_eval(p, xm);
      const double fd = (ep.xi - em.xi) / (2.0 * h);
      CHECK(std::abs(fd - e.grad[r]) <= 1e-5 * std::max(1.0, std::abs(e.grad[r])));
      for (int s = 0; s < 2; ++s) {
        const double fd2 = (ep.grad[s] - em.grad[s]) / (2.0 * h);
        CHECK(std::abs(fd2 - e.hessian[s][r]) <= 1e-5 * std::max(1.0, std::abs(e.hessian[s][r])));
      }
    }
    // Gradient = traces w.r.t. the deformed metric, computed independently.
    const MetricMatrix gx(two_forms::deformed_metric(p, x));
    CHECK(std::abs(e.grad[0] - core::trace_wrt(p.q1, gx)) <= 1e-9 * std::max(1.0, std::abs(e.grad[0])));
    CHECK(std::abs(e.grad[1] - core::trace_wrt(p.q2, gx)) <= 1e-9 * std::max(1.0, std::abs(e.grad[1])));
    // Strict convexity for non-proportional pairs.
    const double tr = e.hessian[0][0] + e.hessian[1][1];
    const double det = e.hessian[0][0] * e.hessian[1][1] - e.hessian[0][1] * e.hessian[1][0];
    const double lmin = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    CHECK(lmin > 1e-8);
  }
}

TEST_CASE("proportional pairs have a flat Hessian direction") {
  Rng rng(54);
  for (int t = 0; t < 20; ++t) {
    const int d = qtest::uniform_int(rng, 2, 4);
    const HermitianMatrix q2(qtest::random_hermitian(rng, d));
    const double mu = qtest::uniform(rng, 0.2, 3.0);
    const PairState p(mu * q2, q2);
    const auto e = two_forms::xi_eval(p, {0.01, 0.02});
    REQUIRE(e.in_O);
    // Direction (1, -mu) leaves mu x1 + x2 unchanged.
    const double v0 = 1.0, v1 = -mu;
    const double hv0 = e.hessian[0][0] * v0 + e.hessian[0][1] * v1;
    const double hv1 = e.hessian[1][0] * v0 + e.hessian[1][1] * v1;
    CHECK(std::hypot(hv0, hv1) <= 1e-9 * std::max(1.0, e.hessian[1][1]));
    double m = 0.0;
    CHECK(two_forms::proportionality_defect(p, &m) <= 1e-12);
    CHECK(m == doctest::Approx(mu));
  }
}

TEST_CASE("O is starlike") {
  Rng rng(55);
  const PairState p = random_pair(rng, 3);
  for (int t = 0; t < 100; ++t) {
    const double theta = qtest::uniform(rng, 0.0, 2.0 * 3.141592653589793);
    bool left = false;
    for (int k = 1; k <= 400; ++k) {
      const double r = 0.02 * k;
      const bool in = two_forms::xi_eval(p, {r * std::cos(theta), r * std::sin(theta)}).in_O;
      if (!in) left = true;
      if (left) CHECK_FALSE(in);
    }
  }
}

TEST_CASE("level curve of the identity pair") {
  const PairState same(HermitianMatrix::identity(2), HermitianMatrix::identity(2));
  two_forms::TraceOptions opts;
  opts.n_angles = 64;
  const auto curve = two_forms::trace_level_curve(same, opts);
  CHECK(curve.first == 0);
  CHECK(curve.last == 63);
  CHECK(curve.contiguous);
  for (const auto& s : curve.samples) {
    CHECK(s.x[0] + s.x[1] == doctest::Approx(kC).epsilon(1e-12));
    CHECK(std::abs(s.xi - 1.0) <= 1e-10);
    CHECK(s.grad[0] == doctest::Approx(2.0 * std::exp(0.5)).epsilon(1e-10));
    CHECK(s.in_gamma_tilde);
  }
}

TEST_CASE("level curve of a mixed pair") {
  const PairState mixed(HermitianMatrix::diagonal({1.0, -0.5}), HermitianMatrix::diagonal({-0.5, 1.0}));
  const auto curve = two_forms::trace_level_curve(mixed);
  CHECK(curve.first >= 0);
  CHECK(curve.contiguous);
  REQUIRE(curve.start);
  REQUIRE(curve.end);
  for (const auto& s : curve.samples) CHECK(std::abs(s.xi - 1.0) <= 1e-10);
  // Symmetric pair: Gamma~ is symmetric about the diagonal.
  CHECK(curve.start->x[0] == doctest::Approx(curve.end->x[1]).epsilon(1e-8));

  const PairState opposite(HermitianMatrix::identity(2), -HermitianMatrix::identity(2));
  CHECK(kind_of([&] { two_forms::trace_level_curve(opposite); }) == ErrorKind::NoCommonDirection);
}

TEST_CASE("ray that never reaches the level") {
  // Along theta the combined form is negative definite: xi < 0 on the whole ray.
  const PairState p(HermitianMatrix::diagonal({-1.0, -1.0}), HermitianMatrix::diagonal({-1.0, -1.0}));
  CHECK(kind_of([&] { two_forms::shoot_ray(p, 0.3); }) == ErrorKind::LevelNotReached);
}

TEST_CASE("pair_metric closed forms") {
  const PairState same(HermitianMatrix::identity(2), HermitianMatrix::identity(2));
  auto pm = two_forms::pair_metric(same);
  CHECK(pm.proportional);
  CHECK(std::abs(pm.gamma[0] - kC / 2.0) <= 1e-12);
  CHECK(std::abs(pm.gamma[1] - kC / 2.0) <= 1e-12);
  CHECK(max_abs(pm.metric.matrix() - std::exp(-0.5) * CMatrix::Identity(2, 2)) <= 1e-12);
  CHECK(pm.traces[0] == doctest::Approx(2.0 * std::exp(0.5)));
  CHECK(pm.traces[1] == doctest::Approx(2.0 * std::exp(0.5)));

  const PairState twice(2.0 * HermitianMatrix::identity(2), HermitianMatrix::identity(2));
  pm = two_forms::pair_metric(twice);
  CHECK(pm.proportional);
  CHECK(pm.mu == doctest::Approx(2.0));
  CHECK(std::abs(pm.gamma[0] - kC / 4.0) <= 1e-12);
  CHECK(std::abs(pm.gamma[1] - kC / 2.0) <= 1e-12);

  // The traced branch agrees on the identity pair.
  two_forms::PairOptions traced;
  traced.detect_proportional = false;
  pm = two_forms::pair_metric(same, traced);
  CHECK_FALSE(pm.proportional);
  CHECK(std::abs(pm.gamma[0] - kC / 2.0) <= 1e-8);
  CHECK(std::abs(pm.gamma[1] - kC / 2.0) <= 1e-8);

  const PairState mixed(HermitianMatrix::diagonal({1.0, -0.5}), HermitianMatrix::diagonal({-0.5, 1.0}));
  pm = two_forms::pair_metric(mixed);
  CHECK(pm.traces[0] > 0.0);
  CHECK(pm.traces[1] > 0.0);
  CHECK(pm.gamma[0] > 0.0);
  CHECK(pm.gamma[1] > 0.0);
  CHECK(pm.gamma[0] == doctest::Approx(pm.gamma[1]).epsilon(1e-8));
}

TEST_CASE("near-proportional pairs warn") {
  const HermitianMatrix q2 = HermitianMatrix::diagonal({1.0, 2.0});
  const HermitianMatrix q1 = q2 + 1e-8 * HermitianMatrix::diagonal({1.0, -1.0});
  const auto pm = two_forms::pair_metric(PairState(q1, q2));
  CHECK_FALSE(pm.proportional);
  CHECK(pm.warnings.size() == 1);
}

TEST_CASE("random pairs") {
  Rng rng(56);
  two_forms::PairOptions opts;
  opts.trace.n_angles = 256;
  for (int t = 0; t < 40; ++t) {
    const int d = qtest::uniform_int(rng, 2, 4);
    const PairState p = random_pair(rng, d);
    const auto pm = two_forms::pair_metric(p, opts);
    CHECK(pm.traces[0] > 0.0);
    CHECK(pm.traces[1] > 0.0);
    CHECK(pm.gamma[0] > 0.0);
    CHECK(pm.gamma[1] > 0.0);
    CHECK(std::abs(two_forms::xi_eval(p, pm.gamma).xi - 1.0) <= 1e-6);
  }
}

TEST_CASE("gamma depends Lipschitz-continuously on the pair") {
  Rng rng(57);
  two_forms::PairOptions opts;
  opts.trace.n_angles = 256;
  double k_max = 0.0;
  for (int t = 0; t < 20; ++t) {
    const PairState p = random_pair(rng, 3, 0.2);
    const auto base = two_forms::pair_metric(p, opts);
    const double delta = 1e-4;
    CMatrix e1 = qtest::random_hermitian(rng, 3), e2 = qtest::random_hermitian(rng, 3);
    const double nrm = std::sqrt(e1.squaredNorm() + e2.squaredNorm());
    const PairState pp(HermitianMatrix(p.q1.matrix() + delta * e1 / nrm), HermitianMatrix(p.q2.matrix() + delta * e2 / nrm),
                       p.base);
    const auto moved = two_forms::pair_metric(pp, opts);
    k_max = std::max(k_max, std::hypot(moved.gamma[0] - base.gamma[0], moved.gamma[1] - base.gamma[1]) / delta);
  }
  MESSAGE("empirical Lipschitz constant " << k_max);
  CHECK(k_max < 100.0);
}

namespace {

FormField family_field(int n, bool with_bad = false) {
  std::vector<SamplePoint> pts(n);
  for (int i = 0; i < n; ++i) {
    const double a = 0.2 + 0.6 * i / (n - 1);
    auto& p = pts[i];
    p.id = "a" + std::to_string(i);
    if (i > 0) p.neighbors.push_back("a" + std::to_string(i - 1));
    if (i + 1 < n) p.neighbors.push_back("a" + std::to_string(i + 1));
    p.forms.emplace("Q1", HermitianMatrix::diagonal({1.0, -a, 0.3}));
    p.forms.emplace("Q2", with_bad && i == n / 2 ? -HermitianMatrix::identity(3)
                                                 : HermitianMatrix::diagonal({-a, 1.0, 0.1}));
  }
  return FormField(3, pts);
}

}  // namespace

TEST_CASE("field_metric_top_degree") {
  std::vector<SamplePoint> pts(5);
  for (int i = 0; i < 5; ++i) {
    pts[i].id = std::to_string(i);
    pts[i].forms.emplace("Q1", HermitianMatrix::identity(2));
    pts[i].forms.emplace("Q2", HermitianMatrix::identity(2));
  }
  const auto constant = two_forms::field_metric_top_degree(FormField(2, pts), "Q1", "Q2");
  for (const auto& p : constant.points) {
    CHECK(p.gamma == constant.points[0].gamma);
  }
  CHECK(constant.certificate.passed());
  CHECK(constant.certificate.entries.size() == 10);

  two_forms::PairOptions opts;
  opts.trace.n_angles = 128;
  const auto coarse = two_forms::field_metric_top_degree(family_field(20), "Q1", "Q2", opts);
  const auto fine = two_forms::field_metric_top_degree(family_field(80), "Q1", "Q2", opts);
  CHECK(coarse.certificate.passed());
  CHECK(fine.certificate.passed());
  CHECK(fine.max_adjacent_jump < coarse.max_adjacent_jump);
  CHECK(fine.max_adjacent_jump < 0.5 * coarse.max_adjacent_jump);

  const auto smoothed = two_forms::field_metric_top_degree(family_field(40), "Q1", "Q2", opts, true);
  CHECK(smoothed.certificate.passed());

  try {
    two_forms::field_metric_top_degree(family_field(11, true), "Q1", "Q2", opts);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoCommonDirection);
    CHECK(e.point_id() == "a5");
  }
}
