#include <cmath>

#include "doctest.h"
#include "qpos/counterexample.hpp"
#include "qpos/error.hpp"
#include "support/random.hpp"

using namespace qpos;
using namespace qpos::counterexample;
using qtest::Rng;

TEST_CASE("H_x entries") {
  CHECK(h_x({0, 0, 0}).matrix() == CMatrix::Identity(2, 2));
  const Point x{0.3, -0.4, 1.2};
  const double r = std::sqrt(0.09 + 0.16 + 1.44), e = std::exp(-1.0 / (r * r));
  const CMatrix m = h_x(x).matrix();
  CHECK(std::abs(m(0, 0) - (1.0 - e * (r - 1.2))) < 1e-15);
  CHECK(std::abs(m(1, 1) - (1.0 - e * (r + 1.2))) < 1e-15);
  CHECK(std::abs(m(0, 1) - (-e * cplx(0.3, -0.4))) < 1e-15);
  CHECK(std::abs(m(1, 0) - (-e * cplx(0.3, 0.4))) < 1e-15);
}

TEST_CASE("sphere eigenvalue at R = 2 is 1 - 4 e^{-1/4}") {
  CHECK(std::abs(sphere_eigenvalue(2.0) - (1.0 - 4.0 * std::exp(-0.25))) < 1e-15);
  CHECK(sphere_eigenvalue(2.0) == doctest::Approx(-2.1152031).epsilon(1e-7));
  // Small R keeps the eigenvalue positive; it tends to -infinity as R grows.
  CHECK(sphere_eigenvalue(0.5) > 0.0);
  CHECK(sphere_eigenvalue(100.0) < -100.0);
}

TEST_CASE("eigenpair identities on a coarse field") {
  const auto f = build(2.0, 20, 1000, 16);
  CHECK(f.grid_points > 0);
  CHECK(f.points.size() == f.grid_points + f.sphere_points + f.axis_points);
  const auto c = check_identities(f);
  CHECK(c.checked == f.points.size());
  CHECK(c.sphere_checked == f.sphere_points);
  CHECK(c.positive_max_err <= 1e-12);
  CHECK(c.sphere_max_err <= 1e-12);
}

TEST_CASE("independent eigen-decomposition agrees at random points") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const CVector u = qtest::gaussian(rng, 3, 1);
    const double rad = qtest::uniform(rng, 0.2, 3.0);
    const Point x{u(0).real(), u(1).real(), u(2).real()};
    const double n = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    const Point xs{rad * x[0] / n, rad * x[1] / n, rad * x[2] / n};
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(h_x(xs).matrix());
    // Eigenvalues are 1 and 1 - 2 e^{-|x|^-2} |x| (trace and determinant).
    CHECK(std::abs(es.eigenvalues()(1) - 1.0) < 1e-12);
    CHECK(std::abs(es.eigenvalues()(0) - sphere_eigenvalue(rad)) < 1e-12);
  }
}

TEST_CASE("constant fields hit negative values at R = 2") {
  const auto f = build(2.0, 24, 2000, 32);
  for (const Vec2 c : {Vec2{cplx(1), cplx(0)}, Vec2{cplx(0), cplx(1)}}) {
    const auto s = scan(f, [c](const Point&) { return c; });
    CHECK(s.min_value < 0.0);
    CHECK(s.negative > 0);
    CHECK(s.min_value >= sphere_eigenvalue(2.0) - 1e-12);
  }
  // (1, 0) attains the floor exactly at the south pole.
  const auto s = scan(f, [](const Point&) { return Vec2{cplx(1), cplx(0)}; });
  CHECK(std::abs(s.min_value - sphere_eigenvalue(2.0)) < 1e-12);
}

TEST_CASE("the eigenvalue-one field vanishes on the negative x3 axis") {
  const auto f = build(2.0, 16, 200, 8);
  try {
    scan(f, eigenvector_field);
    FAIL("expected VanishingField");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::VanishingField);
    CHECK_FALSE(e.point_id().empty());
  }
}

TEST_CASE("all twenty test fields find a negative value") {
  const auto f = build(2.0, 24, 4096, 32);
  const auto fields = test_fields(2.0);
  CHECK(fields.size() == 20);
  for (const auto& nf : fields) {
    const auto s = scan(f, nf.field);
    CAPTURE(nf.name);
    CHECK(s.min_value < 0.0);
    CHECK(s.min_norm >= 1e-8);
  }
}

TEST_CASE("stereographic map and its inverse") {
  auto near = [](const Point& a, const Point& b) {
    return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]) < 1e-15;
  };
  CHECK(near(stereographic({cplx(1), cplx(1)}), {1, 0, 0}));
  CHECK(near(stereographic({cplx(0), cplx(1)}), {0, 0, 1}));
  CHECK(near(stereographic({cplx(1), cplx(0)}), {0, 0, -1}));
  CHECK(projective_distance(stereographic_inverse({0, 0, -1}), {cplx(1), cplx(0)}) == 0.0);
  CHECK(projective_distance(stereographic_inverse({0, 0, 1}), {cplx(0), cplx(1)}) == 0.0);
  try {
    stereographic({cplx(0), cplx(0)});
    FAIL("expected ZeroRepresentative");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroRepresentative);
  }
  Rng rng(12);
  for (int t = 0; t < 1000; ++t) {
    const CVector z = qtest::gaussian(rng, 2, 1) * std::pow(10.0, qtest::uniform(rng, -3, 3));
    const Vec2 v{z(0), z(1)};
    const Point x = stereographic(v);
    CHECK(std::abs(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0) < 1e-14);
    CHECK(projective_distance(stereographic_inverse(x), v) <= 1e-12);
    // And the other way round.
    const Point back = stereographic(stereographic_inverse(x));
    CHECK(std::abs(back[0] - x[0]) + std::abs(back[1] - x[1]) + std::abs(back[2] - x[2]) < 1e-12);
  }
}
