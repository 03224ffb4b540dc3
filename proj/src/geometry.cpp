#include "qpos/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/json_io.hpp"
#include "qpos/parallel.hpp"

namespace qpos::geometry {

// --- jets --------------------------------------------------------------------

Jet constant_jet(int n, double c) { return Jet{c, CVector::Zero(n), CMatrix::Zero(n, n)}; }

Jet quadratic_jet(const CMatrix& d, const CVector& z) {
  const CVector dz = d * z;
  return Jet{z.dot(dz).real(), dz, d};
}

Jet real_linear_jet(const CVector& a, const CVector& z) {
  const int n = static_cast<int>(z.size());
  return Jet{(a.transpose() * z)(0).real(), 0.5 * a.conjugate(), CMatrix::Zero(n, n)};
}

Jet compose(const Jet& f, double F, double F1, double F2) {
  return Jet{F, F1 * f.grad, F1 * f.hess + F2 * (f.grad * f.grad.adjoint())};
}

Jet operator+(const Jet& a, const Jet& b) { return Jet{a.value + b.value, a.grad + b.grad, a.hess + b.hess}; }
Jet operator-(const Jet& a, const Jet& b) { return Jet{a.value - b.value, a.grad - b.grad, a.hess - b.hess}; }
Jet operator*(double s, const Jet& a) { return Jet{s * a.value, s * a.grad, s * a.hess}; }

Jet operator*(const Jet& a, const Jet& b) {
  return Jet{a.value * b.value, a.value * b.grad + b.value * a.grad,
             a.value * b.hess + b.value * a.hess + a.grad * b.grad.adjoint() + b.grad * a.grad.adjoint()};
}

Jet operator/(const Jet& a, const Jet& b) {
  const double v = b.value;
  return a * compose(b, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
}

Jet log(const Jet& a) { return compose(a, std::log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value)); }

HermitianMatrix complex_hessian_fd(const RealFunction& f, const CVector& z, double h) {
  const int n = static_cast<int>(z.size());
  const int m = 2 * n;
  const double step = h * std::max(1.0, z.norm());
  auto shifted = [&](int a, double da, int b, double db) {
    CVector y = z;
    auto bump = [&](int k, double s) {
      if (k < n) {
        y(k) += cplx(s, 0.0);
      } else {
        y(k - n) += cplx(0.0, s);
      }
    };
    bump(a, da);
    if (b >= 0) bump(b, db);
    return f(y);
  };
  const double f0 = f(z);
  RMatrix r(m, m);
  for (int a = 0; a < m; ++a) {
    r(a, a) = (shifted(a, step, -1, 0) - 2.0 * f0 + shifted(a, -step, -1, 0)) / (step * step);
    for (int b = a + 1; b < m; ++b) {
      r(a, b) = (shifted(a, step, b, step) - shifted(a, step, b, -step) - shifted(a, -step, b, step) +
                 shifted(a, -step, b, -step)) /
                (4.0 * step * step);
      r(b, a) = r(a, b);
    }
  }
  // hess(j, k) = 1/4 [(f_xkxj + f_ykyj) + i (f_xkyj - f_ykxj)]
  CMatrix out(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      out(j, k) = 0.25 * cplx(r(k, j) + r(n + k, n + j), r(k, n + j) - r(n + k, j));
    }
  }
  return HermitianMatrix(out, 1e-6);
}

// --- domains -----------------------------------------------------------------

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, msg);
}

// Size of the homogeneous vector of the projective part.
int homog_size(const Domain& d) {
  if (d.projective()) return d.n + 1;
  if (d.type == DomainType::Product) return d.q;
  return 0;
}

// Number of leading affine coordinates (C^{n-q+1} factor of a product).
int affine_size(const Domain& d) {
  if (d.projective()) return 0;
  if (d.type == DomainType::Product) return d.n - d.q + 1;
  return d.n;
}

// Jet of w* D w (D diagonal, real) with w the homogeneous vector of a chart
// point of CP^{m-1} whose coordinates start at offset `off` in z.
Jet chart_quadratic(const std::vector<double>& diag, int chart, const CVector& z, int off) {
  const int n = static_cast<int>(z.size());
  const int m = static_cast<int>(diag.size());
  Jet j = constant_jet(n, 0.0);
  for (int k = 0, c = 0; k < m; ++k) {
    if (k == chart) {
      j.value += diag[k];
      continue;
    }
    const int idx = off + c++;
    j.value += diag[k] * std::norm(z(idx));
    j.grad(idx) = diag[k] * z(idx);
    j.hess(idx, idx) = diag[k];
  }
  return j;
}

std::vector<double> group_weights(int m, int first, int count, double value) {
  std::vector<double> w(m, 0.0);
  for (int k = first; k < first + count; ++k) w[k] = value;
  return w;
}

Jet mqn_split_jet(int n, int q, const ChartPoint& p) {
  const int pos = n - q + 1;
  const Jet a = chart_quadratic(group_weights(n + 1, 0, pos, 1.0), p.chart, p.z, 0);
  const Jet b = chart_quadratic(group_weights(n + 1, pos, q, 1.0), p.chart, p.z, 0);
  return log(b) - log(b - a);
}

}  // namespace

Domain Domain::ball(int n, double radius) {
  require(n >= 1, "ball: n must be >= 1");
  require(radius > 0.0, "ball: radius must be positive");
  Domain d;
  d.type = DomainType::Ball;
  d.n = n;
  d.radius = radius;
  d.center = CVector::Zero(n);
  return d;
}

Domain Domain::quadric(int n, int q, std::vector<double> mu) {
  require(n >= 2, "quadric: n must be >= 2");
  require(q >= 1 && q <= n, "quadric: q outside [1, n]");
  require(static_cast<int>(mu.size()) == n + 1, "quadric: mu needs n + 1 entries");
  bool negative = false;
  for (int j = 0; j < n + 1; ++j) {
    require(mu[j] != 0.0, "quadric: mu_j must be nonzero");
    negative = negative || mu[j] < 0.0;
    if (j < n - q + 1) {
      require(mu[j] > 1.0, "quadric: mu_j must exceed 1 for j <= n - q + 1");
    } else {
      require(mu[j] > -1.0, "quadric: mu_j must exceed -1 for j > n - q + 1");
    }
  }
  require(negative, "quadric: some mu_j must be negative");
  Domain d;
  d.type = DomainType::Quadric;
  d.n = n;
  d.q = q;
  d.mu = std::move(mu);
  return d;
}

Domain Domain::mqn(int n, int q, double level) {
  require(n >= 1 && q >= 1 && q <= n, "mqn: need 1 <= q <= n");
  require(level > 0.0, "mqn: level must be positive");
  Domain d;
  d.type = DomainType::Mqn;
  d.n = n;
  d.q = q;
  d.level = level;
  return d;
}

Domain Domain::product(int n, int q, double radius) {
  require(q >= 2 && q <= n, "product: need 2 <= q <= n");
  require(radius > 0.0, "product: radius must be positive");
  Domain d;
  d.type = DomainType::Product;
  d.n = n;
  d.q = q;
  d.radius = radius;
  return d;
}

Domain Domain::custom(CMatrix a, CVector b, double c, double sample_radius) {
  require(a.rows() == a.cols() && a.rows() >= 1, "custom: A must be square");
  require(b.size() == a.rows(), "custom: b has the wrong length");
  require(sample_radius > 0.0, "custom: sample_radius must be positive");
  Domain d;
  d.type = DomainType::Custom;
  d.n = static_cast<int>(a.rows());
  d.custom_a = HermitianMatrix(a).matrix();
  d.custom_b = std::move(b);
  d.custom_c = c;
  d.sample_radius = sample_radius;
  return d;
}

std::string Domain::name() const {
  switch (type) {
    case DomainType::Ball: return "ball";
    case DomainType::Quadric: return "quadric";
    case DomainType::Mqn: return "mqn";
    case DomainType::Product: return "product";
    case DomainType::Custom: return "custom";
  }
  return "?";
}

Domain domain_from_json(const nlohmann::ordered_json& j) {
  auto schema = [](const std::string& msg) { return Error(ErrorKind::SchemaError, msg); };
  if (!j.is_object()) throw schema("$: domain must be an object");
  if (!j.contains("type") || !j["type"].is_string()) throw schema("$.type: missing domain type");
  auto get_int = [&](const char* key, int def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_number_integer()) throw schema(std::string("$.") + key + ": expected an integer");
    return j[key].get<int>();
  };
  auto get_num = [&](const char* key, double def) {
    if (!j.contains(key)) return def;
    if (!j[key].is_number()) throw schema(std::string("$.") + key + ": expected a number");
    return j[key].get<double>();
  };
  const std::string type = j["type"];
  try {
    if (type == "ball") {
      Domain d = Domain::ball(get_int("n", 2), get_num("radius", 1.0));
      if (j.contains("center_re")) {
        const auto re = io::real_array(j["center_re"], "$.center_re");
        if (static_cast<int>(re.size()) != d.n) throw schema("$.center_re: expected n entries");
        for (int k = 0; k < d.n; ++k) d.center(k) = re[k];
      }
      if (j.contains("center_im")) {
        const auto im = io::real_array(j["center_im"], "$.center_im");
        if (static_cast<int>(im.size()) != d.n) throw schema("$.center_im: expected n entries");
        for (int k = 0; k < d.n; ++k) d.center(k) += cplx(0.0, im[k]);
      }
      return d;
    }
    if (type == "quadric") {
      if (!j.contains("mu")) throw schema("$.mu: missing");
      return Domain::quadric(get_int("n", 3), get_int("q", 2), io::real_array(j["mu"], "$.mu"));
    }
    if (type == "mqn") return Domain::mqn(get_int("n", 3), get_int("q", 2), get_num("level", 1.0));
    if (type == "product") return Domain::product(get_int("n", 3), get_int("q", 2), get_num("radius", 1.0));
    if (type == "custom") {
      if (!j.contains("A")) throw schema("$.A: missing");
      const CMatrix a = io::hermitian_from_json(j["A"], "$.A").matrix();
      CVector b = CVector::Zero(a.rows());
      if (j.contains("b_re")) {
        const auto re = io::real_array(j["b_re"], "$.b_re");
        if (static_cast<Eigen::Index>(re.size()) != a.rows()) throw schema("$.b_re: expected n entries");
        for (Eigen::Index k = 0; k < a.rows(); ++k) b(k) = re[k];
      }
      if (j.contains("b_im")) {
        const auto im = io::real_array(j["b_im"], "$.b_im");
        if (static_cast<Eigen::Index>(im.size()) != a.rows()) throw schema("$.b_im: expected n entries");
        for (Eigen::Index k = 0; k < a.rows(); ++k) b(k) += cplx(0.0, im[k]);
      }
      return Domain::custom(a, b, get_num("c", 0.0), get_num("sample_radius", 2.0));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    throw schema(std::string("$: ") + e.what());
  }
  throw schema("$.type: unknown domain type '" + type + "'");
}

nlohmann::ordered_json domain_to_json(const Domain& d) {
  nlohmann::ordered_json j;
  j["type"] = d.name();
  j["n"] = d.n;
  switch (d.type) {
    case DomainType::Ball: {
      j["radius"] = d.radius;
      std::vector<double> re(d.n), im(d.n);
      for (int k = 0; k < d.n; ++k) {
        re[k] = d.center(k).real();
        im[k] = d.center(k).imag();
      }
      j["center_re"] = re;
      j["center_im"] = im;
      break;
    }
    case DomainType::Quadric:
      j["q"] = d.q;
      j["mu"] = d.mu;
      break;
    case DomainType::Mqn:
      j["q"] = d.q;
      j["level"] = d.level;
      break;
    case DomainType::Product:
      j["q"] = d.q;
      j["radius"] = d.radius;
      break;
    case DomainType::Custom: {
      j["A"] = io::matrix_to_json(d.custom_a);
      std::vector<double> re(d.n), im(d.n);
      for (int k = 0; k < d.n; ++k) {
        re[k] = d.custom_b(k).real();
        im[k] = d.custom_b(k).imag();
      }
      j["b_re"] = re;
      j["b_im"] = im;
      j["c"] = d.custom_c;
      j["sample_radius"] = d.sample_radius;
      break;
    }
  }
  return j;
}

CVector homogeneous(const Domain& d, const ChartPoint& p) {
  const int m = homog_size(d);
  if (m == 0) return {};
  const int off = affine_size(d);
  CVector w(m);
  for (int k = 0, c = 0; k < m; ++k) w(k) = k == p.chart ? cplx(1.0) : p.z(off + c++);
  return w;
}

ChartPoint to_chart(const Domain& d, const CVector& w, int chart) {
  const int m = homog_size(d);
  if (m == 0 || w.size() != m) throw Error(ErrorKind::InvalidArgument, "to_chart: wrong homogeneous size");
  if (chart < 0 || chart >= m || std::abs(w(chart)) == 0.0) {
    throw Error(ErrorKind::ZeroRepresentative, "chart coordinate vanishes");
  }
  ChartPoint p;
  p.chart = chart;
  p.z = CVector::Zero(d.n);
  const int off = affine_size(d);
  for (int k = 0, c = 0; k < m; ++k) {
    if (k != chart) p.z(off + c++) = w(k) / w(chart);
  }
  return p;
}

int preferred_chart(const Domain& d, const CVector& w) {
  int lo = 0, hi = static_cast<int>(w.size());
  if (d.type == DomainType::Quadric) {
    int best = -1;
    for (int k = 0; k < hi; ++k) {
      if (d.mu[k] < 0.0 && (best < 0 || std::abs(w(k)) > std::abs(w(best)))) best = k;
    }
    return best;
  }
  if (d.type == DomainType::Mqn) lo = d.n - d.q + 1;
  int best = lo;
  for (int k = lo; k < hi; ++k) {
    if (std::abs(w(k)) > std::abs(w(best))) best = k;
  }
  return best;
}

Jet mqn_phi_jet(int n, int q, const ChartPoint& p) { return mqn_split_jet(n, q, p); }

Jet rho_jet(const Domain& d, const ChartPoint& p) {
  const int n = d.n;
  switch (d.type) {
    case DomainType::Ball:
      return quadratic_jet(CMatrix::Identity(n, n), p.z - d.center) - constant_jet(n, d.radius * d.radius);
    case DomainType::Quadric: {
      const Jet a = chart_quadratic(d.mu, p.chart, p.z, 0);
      const Jet b = chart_quadratic(std::vector<double>(n + 1, 1.0), p.chart, p.z, 0);
      return a / b;
    }
    case DomainType::Mqn:
      return mqn_split_jet(n, d.q, p) - constant_jet(n, d.level);
    case DomainType::Product: {
      const int m = n - d.q + 1;
      CMatrix id = CMatrix::Zero(n, n);
      id.topLeftCorner(m, m).setIdentity();
      return quadratic_jet(id, p.z) - constant_jet(n, d.radius * d.radius);
    }
    case DomainType::Custom:
      return quadratic_jet(d.custom_a, p.z) + real_linear_jet(2.0 * d.custom_b.conjugate(), p.z) +
             constant_jet(n, d.custom_c);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown domain");
}

Jet exhaustion_jet(const Domain& d, const ChartPoint& p) {
  const int n = d.n;
  if (d.projective()) return mqn_split_jet(n, d.q, p);
  CMatrix id = CMatrix::Identity(n, n);
  if (d.type == DomainType::Product) {
    const int m = n - d.q + 1;
    id.bottomRightCorner(n - m, n - m).setZero();
  }
  return quadratic_jet(id, p.z);
}

// --- frames ------------------------------------------------------------------

BoundaryFrame boundary_frame(const CVector& d_rho) {
  const double norm = d_rho.norm();
  if (!(norm >= 1e-6)) {
    std::ostringstream os;
    os << "|drho| = " << norm << " below 1e-6";
    throw Error(ErrorKind::FrameInvalid, os.str());
  }
  const int n = static_cast<int>(d_rho.size());
  const CMatrix col = d_rho;
  Eigen::HouseholderQR<CMatrix> qr(col);
  const CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  BoundaryFrame f;
  f.d_rho = d_rho;
  f.tangent = q.rightCols(n - 1);
  f.transverse = d_rho / norm;
  return f;
}

HermitianMatrix levi_form(const HermitianMatrix& hess_rho, const BoundaryFrame& frame) {
  const int n = hess_rho.dim();
  if (frame.tangent.rows() != n || frame.tangent.cols() != n - 1 || frame.d_rho.size() != n) {
    throw Error(ErrorKind::FrameInvalid, "frame dimensions do not match the Hessian");
  }
  const double scale = frame.d_rho.norm();
  if (!(scale >= 1e-6)) throw Error(ErrorKind::FrameInvalid, "|drho| below 1e-6");
  const double orth = max_abs(frame.tangent.adjoint() * frame.tangent - CMatrix::Identity(n - 1, n - 1));
  const double tangency = (frame.d_rho.adjoint() * frame.tangent).cwiseAbs().maxCoeff() / scale;
  if (!(orth <= 1e-10) || !(tangency <= 1e-10)) {
    std::ostringstream os;
    os << "frame defect: orthonormality " << orth << ", drho(L) " << tangency;
    throw Error(ErrorKind::FrameInvalid, os.str());
  }
  return hess_rho.congruence(frame.tangent);
}

// --- sampling ----------------------------------------------------------------

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::uint64_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), 0x71u};
  return Rng(seq);
}

CVector gaussian_vector(Rng& rng, int m) {
  std::normal_distribution<double> g;
  CVector v(m);
  for (int k = 0; k < m; ++k) v(k) = cplx(g(rng), g(rng));
  return v;
}

std::vector<double> projector_embed(CVector w) {
  w /= w.norm();
  std::vector<double> e;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    for (Eigen::Index k = j; k < w.size(); ++k) {
      const cplx v = w(j) * std::conj(w(k));
      e.push_back(v.real());
      if (k != j) e.push_back(v.imag());
    }
  }
  return e;
}

std::vector<double> embed(const Domain& d, const ChartPoint& p) {
  std::vector<double> e;
  const int a = affine_size(d);
  for (int k = 0; k < a; ++k) {
    e.push_back(p.z(k).real());
    e.push_back(p.z(k).imag());
  }
  if (homog_size(d) > 0) {
    const auto pe = projector_embed(homogeneous(d, p));
    e.insert(e.end(), pe.begin(), pe.end());
  }
  return e;
}

ChartPoint rechart(const Domain& d, const ChartPoint& p) {
  if (homog_size(d) == 0) return p;
  const CVector w = homogeneous(d, p);
  ChartPoint out = to_chart(d, w, preferred_chart(d, w));
  out.z.head(affine_size(d)) = p.z.head(affine_size(d));
  return out;
}

ChartPoint random_start(const Domain& d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChartPoint p;
  const int n = d.n;
  switch (d.type) {
    case DomainType::Ball: {
      CVector v = gaussian_vector(rng, n);
      p.z = d.center + d.radius * (0.5 + u(rng)) * v / v.norm();
      return p;
    }
    case DomainType::Custom: {
      CVector v = gaussian_vector(rng, n);
      p.z = d.sample_radius * std::pow(u(rng), 1.0 / (2.0 * n)) * v / v.norm();
      return p;
    }
    case DomainType::Product: {
      const int m = n - d.q + 1;
      CVector v = gaussian_vector(rng, m);
      const CVector w = gaussian_vector(rng, d.q);
      p = to_chart(d, w, preferred_chart(d, w));
      p.z.head(m) = d.radius * (0.5 + u(rng)) * v / v.norm();
      return p;
    }
    case DomainType::Quadric:
    case DomainType::Mqn: {
      CVector w = gaussian_vector(rng, n + 1);
      if (d.type == DomainType::Mqn) {
        // Start inside M_q^n so that phi is defined.
        const int pos = n - d.q + 1;
        const double a = w.head(pos).squaredNorm(), b = w.tail(d.q).squaredNorm();
        const double target = (1.0 - std::exp(-d.level)) * (0.2 + 0.75 * u(rng));
        w.head(pos) *= std::sqrt(target * b / a);
      }
      return to_chart(d, w, preferred_chart(d, w));
    }
  }
  return p;
}

}  // namespace

bool newton_project(const Domain& d, ChartPoint& p, double level, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    const Jet j = rho_jet(d, p);
    const double r = j.value - level;
    if (!std::isfinite(r)) return false;
    const double g2 = j.grad.squaredNorm();
    if (!(g2 >= 1e-12)) return false;
    if (std::abs(r) <= 1e-14 * std::max(1.0, std::abs(level))) return true;
    // rho(z - t b) ~ rho - 2 t |b|^2 along the real gradient direction.
    p.z -= (r / (2.0 * g2)) * j.grad;
    if (!p.z.allFinite() || p.z.norm() > 1e8) return false;
  }
  const Jet j = rho_jet(d, p);
  return std::isfinite(j.value) && std::abs(j.value - level) <= 1e-12 * std::max(1.0, std::abs(level));
}

BoundarySampling sample_boundary(const Domain& d, const SampleOptions& opts) {
  if (opts.samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be >= 1");
  if (opts.knn < 1) throw Error(ErrorKind::InvalidArgument, "knn must be >= 1");
  const std::size_t ns = static_cast<std::size_t>(opts.samples);
  BoundarySampling out;
  out.samples.resize(ns);
  std::vector<long> restarts(ns, 0);
  parallel_for(ns, opts.threads, [&](std::size_t i) {
    Rng rng = stream(opts.seed, i);
    for (int attempt = 0; attempt < opts.attempts; ++attempt) {
      ChartPoint p = random_start(d, rng);
      if (!newton_project(d, p, 0.0, opts.newton_max)) {
        ++restarts[i];
        continue;
      }
      p = rechart(d, p);
      if (!newton_project(d, p, 0.0, opts.newton_max)) {
        ++restarts[i];
        continue;
      }
      const Jet j = rho_jet(d, p);
      if (!(j.grad.norm() >= 1e-6)) {
        ++restarts[i];
        continue;
      }
      BoundarySample s;
      s.id = "b" + std::to_string(i);
      s.point = p;
      s.embed = embed(d, p);
      s.rho = j.value;
      if (opts.mode == HessianMode::Analytic) {
        s.hess_rho = j.hessian();
      } else {
        const ChartPoint base = p;
        s.hess_rho = complex_hessian_fd(
            [&](const CVector& z) {
              ChartPoint q = base;
              q.z = z;
              return rho_jet(d, q).value;
            },
            p.z, opts.fd_step);
      }
      s.frame = boundary_frame(j.grad);
      s.levi = levi_form(s.hess_rho, s.frame);
      out.samples[i] = std::move(s);
      return;
    }
    throw Error(ErrorKind::InvalidArgument, "Newton projection failed repeatedly", "b" + std::to_string(i));
  });
  for (long r : restarts) out.restarts += r;

  // k nearest neighbors in the embedding, symmetrized.
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(opts.knn), ns - 1);
  std::vector<std::vector<std::size_t>> knn(ns);
  parallel_for(ns, opts.threads, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(ns - 1);
    const auto& ei = out.samples[i].embed;
    for (std::size_t j = 0; j < ns; ++j) {
      if (j == i) continue;
      const auto& ej = out.samples[j].embed;
      double s = 0.0;
      for (std::size_t c = 0; c < ei.size(); ++c) s += (ei[c] - ej[c]) * (ei[c] - ej[c]);
      dist.emplace_back(s, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t c = 0; c < k; ++c) knn[i].push_back(dist[c].second);
  });
  out.adjacency.assign(ns, {});
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j : knn[i]) {
      out.adjacency[i].push_back(j);
      out.adjacency[j].push_back(i);
    }
  }
  for (auto& a : out.adjacency) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  // Components by union-find.
  std::vector<std::size_t> parent(ns);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j : out.adjacency[i]) {
      const std::size_t a = find(i), b = find(j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  out.component.assign(ns, -1);
  std::vector<int> label(ns, -1);
  for (std::size_t i = 0; i < ns; ++i) {
    const std::size_t r = find(i);
    if (label[r] < 0) label[r] = out.n_components++;
    out.component[i] = label[r];
  }
  return out;
}

ChartOverlap chart_overlap_check(const Domain& d, const BoundarySampling& s, int count) {
  ChartOverlap out;
  if (homog_size(d) == 0) return out;
  const int m = std::min<int>(count, static_cast<int>(s.samples.size()));
  for (int i = 0; i < m; ++i) {
    const auto& smp = s.samples[static_cast<std::size_t>(i)];
    const CVector w = homogeneous(d, smp.point);
    int alt = -1;
    for (int k = 0; k < w.size(); ++k) {
      if (k == smp.point.chart) continue;
      if (d.type == DomainType::Mqn && k < d.n - d.q + 1) continue;
      if (alt < 0 || std::abs(w(k)) > std::abs(w(alt))) alt = k;
    }
    if (alt < 0 || std::abs(w(alt)) < 1e-3 * w.norm()) continue;
    ChartPoint p = to_chart(d, w, alt);
    p.z.head(affine_size(d)) = smp.point.z.head(affine_size(d));
    const Jet r1 = rho_jet(d, smp.point), r2 = rho_jet(d, p);
    const Jet f1 = exhaustion_jet(d, smp.point), f2 = exhaustion_jet(d, p);
    out.max_value_gap = std::max({out.max_value_gap, std::abs(r1.value - r2.value), std::abs(f1.value - f2.value)});
    const HermitianMatrix l2 = levi_form(r2.hessian(), boundary_frame(r2.grad));
    const Inertia a = core::inertia(smp.levi), b = core::inertia(l2);
    if (!(a == b)) ++out.inertia_mismatches;
    ++out.checked;
  }
  return out;
}

// --- Z(q) -----------------------------------------------------------------------

ZqReport zq_check(const BoundarySampling& s, int n, int q, bool throw_on_failure) {
  if (q < 1 || q > n - 1) {
    throw Error(ErrorKind::QOutOfRange, "q = " + std::to_string(q) + " outside [1, n - 1]");
  }
  ZqReport rep;
  rep.n = n;
  rep.q = q;
  rep.samples.resize(s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const Inertia in = core::inertia(s.samples[i].levi);
    ZqSample& z = rep.samples[i];
    z.n_plus = in.n_plus;
    z.n_minus = in.n_minus;
    z.branch = in.n_plus >= n - q ? 1 : (in.n_minus >= q + 1 ? 2 : 0);
  }
  // A component takes its majority branch; samples disagreeing with it fail.
  rep.component_branch.assign(static_cast<std::size_t>(s.n_components), 0);
  std::vector<std::array<int, 3>> counts(static_cast<std::size_t>(s.n_components), {0, 0, 0});
  for (std::size_t i = 0; i < s.samples.size(); ++i) ++counts[s.component[i]][rep.samples[i].branch];
  for (int c = 0; c < s.n_components; ++c) {
    const auto& k = counts[c];
    const int major = k[1] >= k[2] ? 1 : 2;
    if (k[0] == 0 && k[3 - major] == 0) rep.component_branch[c] = major;
  }
  std::size_t first_bad = 0;
  for (std::size_t i = s.samples.size(); i-- > 0;) {
    const auto& k = counts[s.component[i]];
    const int major = k[1] >= k[2] ? 1 : 2;
    if (rep.samples[i].branch != major) {
      rep.failing.push_back(s.samples[i].id);
      first_bad = i;
    }
  }
  std::reverse(rep.failing.begin(), rep.failing.end());
  if (throw_on_failure && !rep.failing.empty()) {
    const std::size_t i = first_bad;
    std::ostringstream os;
    os << rep.failing.size() << " samples violate Z(" << q << "); first has (n+, n-) = (" << rep.samples[i].n_plus
       << ", " << rep.samples[i].n_minus << ")";
    throw Error(ErrorKind::ZqViolated, os.str(), rep.failing.front());
  }
  return rep;
}

FormField levi_field(const BoundarySampling& s, int n) {
  std::vector<SamplePoint> pts(s.samples.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].id = s.samples[i].id;
    pts[i].coords = s.samples[i].embed;
    for (std::size_t j : s.adjacency[i]) pts[i].neighbors.push_back(s.samples[j].id);
    pts[i].forms.emplace("L", s.samples[i].levi);
  }
  return FormField(n - 1, std::move(pts));
}

PipelineResult zq_metric_pipeline(const BoundarySampling& s, int n, int q, const single::Options& opts) {
  PipelineResult res;
  res.zq = zq_check(s, n, q, opts.throw_on_failure);
  const std::size_t ns = s.samples.size();
  res.q_tilde.assign(ns, 0);
  res.metrics.assign(ns, MetricMatrix::identity(n - 1));
  for (int c = 0; c < s.n_components; ++c) {
    const int branch = res.zq.component_branch[c];
    if (branch == 0) continue;
    const int qt = branch == 1 ? q : n - q - 1;
    const std::string form = branch == 1 ? "L" : "-L";
    std::vector<std::size_t> members;
    std::vector<int> local(ns, -1);
    for (std::size_t i = 0; i < ns; ++i) {
      if (s.component[i] == c) {
        local[i] = static_cast<int>(members.size());
        members.push_back(i);
      }
    }
    std::vector<SamplePoint> pts(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& smp = s.samples[members[m]];
      pts[m].id = smp.id;
      pts[m].coords = smp.embed;
      for (std::size_t j : s.adjacency[members[m]]) {
        if (local[j] >= 0) pts[m].neighbors.push_back(s.samples[j].id);
      }
      pts[m].forms.emplace(form, branch == 1 ? smp.levi : -smp.levi);
    }
    const FormField field(n - 1, std::move(pts));
    const auto r = single::synthesize_single(field, form, qt, opts);
    for (std::size_t m = 0; m < members.size(); ++m) {
      res.q_tilde[members[m]] = qt;
      res.metrics[members[m]] = r.metrics[m];
    }
    res.stages.insert(res.stages.end(), r.stages.begin(), r.stages.end());
    res.certificate.entries.insert(res.certificate.entries.end(), r.certificate.entries.begin(),
                                   r.certificate.entries.end());
  }
  return res;
}

// --- M_q^n --------------------------------------------------------------------

MqnReport mqn_inertia_check(int n, int q, int samples, std::uint64_t seed, unsigned threads) {
  if (n < 1 || q < 1 || q > n) throw Error(ErrorKind::QOutOfRange, "mqn: need 1 <= q <= n");
  const Domain d = Domain::mqn(n, q);
  const int pos = n - q + 1;
  MqnReport rep;
  rep.n = n;
  rep.q = q;
  rep.samples = samples;
  const int fd_count = std::min(samples, 50);
  std::vector<char> ok(samples, 0);
  std::vector<double> fd_rel(samples, 0.0), gap(samples, 0.0);
  std::vector<char> overlap(samples, 0);
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    Rng rng = stream(seed, i);
    std::uniform_real_distribution<double> u(0.01, 0.8);
    CVector w = gaussian_vector(rng, n + 1);
    const double a = w.head(pos).squaredNorm(), b = w.tail(q).squaredNorm();
    w.head(pos) *= std::sqrt(u(rng) * b / a);
    const ChartPoint p = to_chart(d, w, preferred_chart(d, w));
    const Jet phi = mqn_phi_jet(n, q, p);
    const HermitianMatrix h = phi.hessian();
    const Inertia in = core::inertia(h);
    ok[i] = in.n_plus == pos && in.n_minus == q - 1 && in.n_zero == 0;
    if (static_cast<int>(i) < fd_count) {
      const HermitianMatrix fd = complex_hessian_fd(
          [&](const CVector& z) {
            ChartPoint c = p;
            c.z = z;
            return mqn_phi_jet(n, q, c).value;
          },
          p.z);
      fd_rel[i] = op_norm(fd.matrix() - h.matrix()) / std::max(1.0, h.norm());
    }
    // The same point in the next-largest chart.
    int alt = -1;
    for (int k = 0; k <= n; ++k) {
      if (k != p.chart && (alt < 0 || std::abs(w(k)) > std::abs(w(alt)))) alt = k;
    }
    if (alt >= 0 && std::abs(w(alt)) > 1e-3 * w.norm()) {
      gap[i] = std::abs(mqn_phi_jet(n, q, to_chart(d, w, alt)).value - phi.value);
      overlap[i] = 1;
    }
  });
  for (int i = 0; i < samples; ++i) {
    rep.inertia_ok += ok[i];
    rep.fd_max_rel = std::max(rep.fd_max_rel, fd_rel[i]);
    rep.overlap_max_gap = std::max(rep.overlap_max_gap, gap[i]);
    rep.overlap_checked += overlap[i];
  }
  rep.fd_checked = fd_count;

  // On S = {|w|_+ = 0} the q - 1 negative eigenvalues vanish.
  if (q >= 2) {
    rep.s_samples = std::max(1, samples / 10);
    for (int i = 0; i < rep.s_samples; ++i) {
      Rng rng = stream(seed ^ 0x5u, static_cast<std::uint64_t>(i));
      CVector w = gaussian_vector(rng, n + 1);
      w.head(pos).setZero();
      const Jet phi = mqn_phi_jet(n, q, to_chart(d, w, preferred_chart(d, w)));
      const Eigen::SelfAdjointEigenSolver<CMatrix> es(phi.hess, Eigen::EigenvaluesOnly);
      const RVector& ev = es.eigenvalues();
      const double small = ev.head(q - 1).cwiseAbs().maxCoeff();
      rep.s_max_negative = std::max(rep.s_max_negative, small);
      if (small <= 1e-8 && ev(q - 1) > 1e-8) ++rep.s_ok;
    }
  }
  return rep;
}

int quadric_inclusion_violations(const Domain& d, int samples, std::uint64_t seed) {
  if (d.type != DomainType::Quadric) throw Error(ErrorKind::InvalidArgument, "not a quadric domain");
  const int n = d.n, pos = n - d.q + 1;
  int bad = 0, found = 0;
  Rng rng = stream(seed, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; found < samples && t < 100 * samples; ++t) {
    CVector w = gaussian_vector(rng, n + 1);
    w.head(pos) *= u(rng);
    double s = 0.0;
    for (int k = 0; k <= n; ++k) s += d.mu[k] * std::norm(w(k));
    if (!(s < 0.0)) continue;
    ++found;
    if (!(w.head(pos).squaredNorm() < w.tail(d.q).squaredNorm())) ++bad;
  }
  return bad;
}

}  // namespace qpos::geometry
