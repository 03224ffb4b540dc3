#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "qpos/types.hpp"

// The family H_x on C^2, x in R^3, that has a positive direction at every x
// but no continuous nowhere-vanishing positive field on a large ball.
namespace qpos::counterexample {

using Point = std::array<double, 3>;
using Vec2 = std::array<cplx, 2>;

/// H_0 = I; otherwise with e = exp(-|x|^-2):
///   [[1 - e(|x| - x3), -e(x1 + i x2)], [-e(x1 - i x2), 1 - e(|x| + x3)]].
HermitianMatrix h_x(const Point& x);

/// 1 - 2 exp(-R^-2) R, the eigenvalue along (x1 + i x2, R + x3) on |x| = R.
double sphere_eigenvalue(double r);

struct Field {
  double radius = 0.0;
  int grid_n = 0;
  std::vector<Point> points;  // grid points in the closed ball, then the sphere, then the -x3 axis
  std::vector<HermitianMatrix> forms;
  std::size_t grid_points = 0, sphere_points = 0, axis_points = 0;
};

/// grid_n^3 grid over [-R, R]^3 restricted to |x| <= R, plus a Fibonacci
/// lattice on |x| = R and points on the negative x3 axis (including the pole).
Field build(double radius, int grid_n, int sphere_points = 4096, int axis_points = 64);

struct IdentityCheck {
  std::size_t checked = 0;
  double positive_max_err = 0.0;  // ||H v - v|| / ||v|| for the eigenvalue-1 vector
  std::size_t sphere_checked = 0;
  double sphere_max_err = 0.0;    // same for the |x| = R eigenpair
};

IdentityCheck check_identities(const Field& f);

using VectorField = std::function<Vec2(const Point&)>;

struct ScanResult {
  double min_value = 0.0;  // min of H_x(v, v) / |v|^2
  std::size_t worst = 0;
  Point worst_x{};
  std::size_t negative = 0;
  double min_norm = 0.0;
};

/// Throws VanishingField naming the grid point when |v(x)| < 1e-8.
ScanResult scan(const Field& f, const VectorField& v, unsigned threads = 1);

/// [z1 : z2] -> S^2. Throws ZeroRepresentative for (0, 0).
Point stereographic(const Vec2& z);
/// S^2 -> CP^1 representative: [(x1 + i x2) / (1 + x3) : 1], or [1 : 0] at the
/// south pole. x is normalized first; throws InvalidArgument for x = 0.
Vec2 stereographic_inverse(const Point& x);
/// |z1 w2 - z2 w1| / (|z| |w|): zero iff the representatives agree projectively.
double projective_distance(const Vec2& z, const Vec2& w);

struct NamedField {
  std::string name;
  VectorField field;
};

/// Twenty nowhere-vanishing continuous fields on the closed ball of radius R:
/// constants and fields (F(zeta), 1), (1, F(zeta)) with zeta the stereographic
/// coordinate (x1 + i x2) / (2R + x3) and F a low-degree polynomial.
std::vector<NamedField> test_fields(double radius);

/// (|x| + x3, -x1 + i x2): an eigenvalue-1 field that vanishes on the
/// negative x3 axis.
Vec2 eigenvector_field(const Point& x);

}  // namespace qpos::counterexample
