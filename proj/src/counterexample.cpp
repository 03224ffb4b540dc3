#include "qpos/counterexample.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/parallel.hpp"

namespace qpos::counterexample {
namespace {

double norm3(const Point& x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }

CVector as_vector(const Vec2& v) {
  CVector out(2);
  out << v[0], v[1];
  return out;
}

double rel_residual(const HermitianMatrix& h, const CVector& v, double lambda) {
  return (h.matrix() * v - lambda * v).norm() / v.norm();
}

}  // namespace

HermitianMatrix h_x(const Point& x) {
  const double r = norm3(x);
  if (r == 0.0) return HermitianMatrix::identity(2);
  const double e = std::exp(-1.0 / (r * r));
  CMatrix m(2, 2);
  m(0, 0) = 1.0 - e * (r - x[2]);
  m(0, 1) = -e * cplx(x[0], x[1]);
  m(1, 0) = -e * cplx(x[0], -x[1]);
  m(1, 1) = 1.0 - e * (r + x[2]);
  return HermitianMatrix(m);
}

double sphere_eigenvalue(double r) { return 1.0 - 2.0 * std::exp(-1.0 / (r * r)) * r; }

Field build(double radius, int grid_n, int sphere_points, int axis_points) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (grid_n < 8) throw Error(ErrorKind::InvalidArgument, "grid_n must be >= 8");
  Field f;
  f.radius = radius;
  f.grid_n = grid_n;
  const double h = 2.0 * radius / (grid_n - 1);
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      for (int k = 0; k < grid_n; ++k) {
        const Point x{-radius + i * h, -radius + j * h, -radius + k * h};
        if (norm3(x) <= radius) f.points.push_back(x);
      }
    }
  }
  f.grid_points = f.points.size();
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int s = 0; s < sphere_points; ++s) {
    const double z = 1.0 - 2.0 * (s + 0.5) / sphere_points;
    const double rr = std::sqrt(1.0 - z * z);
    f.points.push_back({radius * rr * std::cos(golden * s), radius * rr * std::sin(golden * s), radius * z});
  }
  f.points.push_back({0.0, 0.0, radius});
  f.points.push_back({0.0, 0.0, -radius});
  f.sphere_points = static_cast<std::size_t>(sphere_points) + 2;
  for (int a = 1; a <= axis_points; ++a) f.points.push_back({0.0, 0.0, -radius * a / axis_points});
  f.axis_points = static_cast<std::size_t>(axis_points);
  f.forms.reserve(f.points.size());
  for (const auto& x : f.points) f.forms.push_back(h_x(x));
  return f;
}

IdentityCheck check_identities(const Field& f) {
  IdentityCheck out;
  const std::size_t sphere_lo = f.grid_points, sphere_hi = f.grid_points + f.sphere_points;
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    const Point& x = f.points[i];
    const HermitianMatrix& h = f.forms[i];
    const double r = norm3(x);
    CVector v(2);
    if (r == 0.0) {
      v << 1.0, 0.0;
    } else if (x[0] == 0.0 && x[1] == 0.0 && x[2] < 0.0) {
      v << 0.0, 1.0;
    } else {
      v << r + x[2], cplx(-x[0], x[1]);
    }
    out.positive_max_err = std::max(out.positive_max_err, rel_residual(h, v, 1.0));
    ++out.checked;
    if (i >= sphere_lo && i < sphere_hi) {
      CVector s(2);
      if (x[0] == 0.0 && x[1] == 0.0 && x[2] < 0.0) {
        s << 1.0, 0.0;
      } else {
        s << cplx(x[0], x[1]), r + x[2];
      }
      out.sphere_max_err = std::max(out.sphere_max_err, rel_residual(h, s, sphere_eigenvalue(r)));
      ++out.sphere_checked;
    }
  }
  return out;
}

ScanResult scan(const Field& f, const VectorField& v, unsigned threads) {
  const std::size_t n = f.points.size();
  std::vector<double> value(n), norm(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const CVector u = as_vector(v(f.points[i]));
    norm[i] = u.norm();
    if (!(norm[i] >= 1e-8)) {
      std::ostringstream os;
      os << "field vanishes at x = (" << f.points[i][0] << ", " << f.points[i][1] << ", " << f.points[i][2] << ")";
      throw Error(ErrorKind::VanishingField, os.str(), "x" + std::to_string(i));
    }
    value[i] = f.forms[i].value(u) / (norm[i] * norm[i]);
  });
  ScanResult out;
  out.min_value = value[0];
  out.min_norm = norm[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (value[i] < out.min_value) {
      out.min_value = value[i];
      out.worst = i;
    }
    out.min_norm = std::min(out.min_norm, norm[i]);
    if (value[i] < 0.0) ++out.negative;
  }
  out.worst_x = f.points[out.worst];
  return out;
}

Point stereographic(const Vec2& z) {
  const double n2 = std::norm(z[0]) + std::norm(z[1]);
  if (!(n2 > 0.0)) throw Error(ErrorKind::ZeroRepresentative, "[0 : 0] is not a point of CP^1");
  const cplx p = z[0] * std::conj(z[1]);
  return {2.0 * p.real() / n2, 2.0 * p.imag() / n2, (std::norm(z[1]) - std::norm(z[0])) / n2};
}

Vec2 stereographic_inverse(const Point& x) {
  const double r = norm3(x);
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "cannot normalize x = 0");
  const Point u{x[0] / r, x[1] / r, x[2] / r};
  if (u[0] == 0.0 && u[1] == 0.0 && u[2] < 0.0) return {cplx(1.0), cplx(0.0)};
  // [x1 + i x2 : 1 + x3], the same point as [(x1 + i x2) / (1 + x3) : 1]
  // without the division.
  return {cplx(u[0], u[1]), cplx(1.0 + u[2], 0.0)};
}

double projective_distance(const Vec2& z, const Vec2& w) {
  const double nz = std::sqrt(std::norm(z[0]) + std::norm(z[1]));
  const double nw = std::sqrt(std::norm(w[0]) + std::norm(w[1]));
  return std::abs(z[0] * w[1] - z[1] * w[0]) / (nz * nw);
}

std::vector<NamedField> test_fields(double radius) {
  auto zeta = [radius](const Point& x) { return cplx(x[0], x[1]) / (2.0 * radius + x[2]); };
  using Poly = std::function<cplx(cplx)>;
  const std::vector<std::pair<std::string, Poly>> polys = {
      {"z", [](cplx z) { return z; }},
      {"z^2", [](cplx z) { return z * z; }},
      {"1+2z", [](cplx z) { return 1.0 + 2.0 * z; }},
      {"z^3-z", [](cplx z) { return z * z * z - z; }},
      {"3z+i", [](cplx z) { return 3.0 * z + cplx(0, 1); }},
      {"(1+i)z^2", [](cplx z) { return cplx(1, 1) * z * z; }},
      {"conj(z)", [](cplx z) { return std::conj(z); }},
  };
  std::vector<NamedField> out;
  const std::vector<std::pair<std::string, Vec2>> consts = {
      {"(1,0)", {cplx(1), cplx(0)}},  {"(0,1)", {cplx(0), cplx(1)}},     {"(1,1)", {cplx(1), cplx(1)}},
      {"(1,i)", {cplx(1), cplx(0, 1)}}, {"(1,-1)", {cplx(1), cplx(-1)}}, {"(2,1-i)", {cplx(2), cplx(1, -1)}},
  };
  for (const auto& [name, c] : consts) {
    out.push_back({"const " + name, [c](const Point&) { return c; }});
  }
  for (const auto& [name, p] : polys) {
    out.push_back({"(" + name + ", 1)", [p, zeta](const Point& x) { return Vec2{p(zeta(x)), cplx(1)}; }});
  }
  for (const auto& [name, p] : polys) {
    out.push_back({"(1, " + name + ")", [p, zeta](const Point& x) { return Vec2{cplx(1), p(zeta(x))}; }});
  }
  return out;
}

Vec2 eigenvector_field(const Point& x) { return {cplx(norm3(x) + x[2]), cplx(-x[0], x[1])}; }

}  // namespace qpos::counterexample
