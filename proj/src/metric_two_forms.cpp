#include "qpos/metric_two_forms.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/parallel.hpp"

namespace qpos::two_forms {
namespace {

// Forms in a base-orthonormal frame: w Q w with w = G^{-1/2}.
struct Hat {
  CMatrix q1, q2, w;
};

Hat hat(const PairState& p) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> ge(p.base.matrix());
  Hat h;
  h.w = ge.operatorInverseSqrt();
  h.q1 = h.w * p.q1.matrix() * h.w;
  h.q2 = h.w * p.q2.matrix() * h.w;
  h.q1 = 0.5 * (h.q1 + h.q1.adjoint());
  h.q2 = 0.5 * (h.q2 + h.q2.adjoint());
  return h;
}

double lambda_max(const CMatrix& m) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

double min_value(const Hat& h, const CVector& v) {
  return std::min(v.dot(h.q1 * v).real(), v.dot(h.q2 * v).real());
}

// Golden-section minimum of the convex s -> lambda_max(s Q1 + (1-s) Q2).
std::pair<double, double> dual_minimum(const Hat& h) {
  auto phi = [&](double s) { return lambda_max(s * h.q1 + (1.0 - s) * h.q2); };
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = 1.0;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = phi(c), fd = phi(d);
  for (int it = 0; it < 80 && b - a > 1e-13; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = phi(d);
    }
  }
  double best_s = 0.5 * (a + b), best = phi(best_s);
  for (double s : {0.0, 1.0}) {
    const double v = phi(s);
    if (v < best) {
      best = v;
      best_s = s;
    }
  }
  return {best_s, best};
}

CVector top_eigenvector(const CMatrix& m) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  return es.eigenvectors().col(m.rows() - 1);
}

// Line-search ascent on min(Q1(v,v), Q2(v,v)) over the unit sphere.
CVector ascend(const Hat& h, CVector v) {
  v.normalize();
  double f = min_value(h, v);
  for (int it = 0; it < 200; ++it) {
    const double a = v.dot(h.q1 * v).real(), b = v.dot(h.q2 * v).real();
    const CVector g1 = h.q1 * v - a * v, g2 = h.q2 * v - b * v;
    bool improved = false;
    for (double w : {a < b ? 1.0 : 0.0, 0.5}) {
      const CVector dir = w * g1 + (1.0 - w) * g2;
      if (dir.norm() < 1e-15) continue;
      for (double eta = 2.0; eta > 1e-8; eta *= 0.5) {
        const CVector cand = (v + eta * dir).normalized();
        const double fc = min_value(h, cand);
        if (fc > f + 1e-15) {
          v = cand;
          f = fc;
          improved = true;
          break;
        }
      }
      if (improved) break;
    }
    if (!improved) break;
  }
  return v;
}

// Ray data: eigenvalues of cos(theta) Q1 + sin(theta) Q2 in the hat frame.
struct Ray {
  RVector mu;
  double c, s;
  bool in_O(double t) const { return (t * mu.array() < 1.0).all(); }
  double xi(double t) const { return -(1.0 - t * mu.array()).log().sum(); }
};

Ray make_ray(const Hat& h, double theta) {
  Ray r;
  r.c = std::cos(theta);
  r.s = std::sin(theta);
  const CMatrix m = r.c * h.q1 + r.s * h.q2;
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  r.mu = es.eigenvalues();
  return r;
}

LevelCurveSample shoot(const PairState& pair, const Hat& h, double theta, const TraceOptions& opts) {
  if (!(opts.level > 0.0)) throw Error(ErrorKind::InvalidArgument, "level must be positive");
  const Ray ray = make_ray(h, theta);
  auto below = [&](double t) { return ray.in_O(t) && ray.xi(t) < opts.level; };
  double hi = 1.0;
  int doublings = 0;
  while (below(hi)) {
    if (doublings == 20) {
      std::ostringstream os;
      os << "ray at theta = " << theta << " stays below the level up to t = " << hi;
      throw Error(ErrorKind::LevelNotReached, os.str());
    }
    hi *= 2.0;
    ++doublings;
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (below(mid) ? lo : hi) = mid;
  }
  LevelCurveSample s;
  s.theta = theta;
  s.t = lo;
  s.x = {lo * ray.c, lo * ray.s};
  const auto ev = xi_eval(pair, s.x);
  s.xi = ev.xi;
  s.grad = ev.grad;
  s.in_gamma_tilde = ev.in_O && s.grad[0] > opts.grad_floor && s.grad[1] > opts.grad_floor;
  return s;
}

}  // namespace

PairState::PairState(HermitianMatrix a, HermitianMatrix b)
    : q1(std::move(a)), q2(std::move(b)), base(MetricMatrix::identity(q1.dim())) {
  if (q1.dim() != q2.dim()) throw Error(ErrorKind::DimensionMismatch, "Q1 and Q2 differ in dimension");
}

PairState::PairState(HermitianMatrix a, HermitianMatrix b, MetricMatrix g)
    : q1(std::move(a)), q2(std::move(b)), base(std::move(g)) {
  if (q1.dim() != q2.dim()) throw Error(ErrorKind::DimensionMismatch, "Q1 and Q2 differ in dimension");
  if (base.dim() != q1.dim()) throw Error(ErrorKind::DimensionMismatch, "base metric dimension");
}

double common_direction_bound(const PairState& pair) { return dual_minimum(hat(pair)).second; }

std::optional<CVector> find_common_direction(const PairState& pair, int trials, unsigned seed) {
  const Hat h = hat(pair);
  const int d = pair.dim();
  std::vector<CVector> starts;
  for (int k = 0; k <= 32; ++k) {
    const double s = k / 32.0;
    starts.push_back(top_eigenvector(s * h.q1 + (1.0 - s) * h.q2));
  }
  starts.push_back(top_eigenvector(dual_minimum(h).first * h.q1 + (1.0 - dual_minimum(h).first) * h.q2));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < trials; ++k) {
    CVector v(d);
    for (int j = 0; j < d; ++j) v(j) = cplx(n(rng), n(rng));
    starts.push_back(v);
  }
  CVector best;
  double best_val = -std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const CVector v = ascend(h, s);
    const double val = min_value(h, v);
    if (val > best_val) {
      best_val = val;
      best = v;
    }
  }
  if (!(best_val > 0.0)) return std::nullopt;
  const CVector v = h.w * best;  // unit in the base metric
  return v;
}

CMatrix deformed_metric(const PairState& pair, const std::array<double, 2>& x) {
  return pair.base.matrix() - x[0] * pair.q1.matrix() - x[1] * pair.q2.matrix();
}

XiEvaluation xi_eval(const PairState& pair, const std::array<double, 2>& x) {
  const Hat h = hat(pair);
  const int d = pair.dim();
  XiEvaluation out;
  out.x = x;
  CMatrix m = CMatrix::Identity(d, d) - x[0] * h.q1 - x[1] * h.q2;
  m = 0.5 * (m + m.adjoint());
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const RVector& ev = es.eigenvalues();
  if (!(ev(0) > 0.0)) return out;
  out.in_O = true;
  out.xi = -ev.array().log().sum();
  const CMatrix inv = es.eigenvectors() * ev.cwiseInverse().cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  const CMatrix a1 = inv * h.q1, a2 = inv * h.q2;
  out.grad = {a1.trace().real(), a2.trace().real()};
  const double h12 = (a2 * a1).trace().real();
  out.hessian = {{{(a1 * a1).trace().real(), h12}, {h12, (a2 * a2).trace().real()}}};
  return out;
}

LevelCurveSample shoot_ray(const PairState& pair, double theta, const TraceOptions& opts) {
  return shoot(pair, hat(pair), theta, opts);
}

LevelCurve trace_level_curve(const PairState& pair, const TraceOptions& opts) {
  if (opts.n_angles < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 angles");
  if (!pair.witness && !find_common_direction(pair)) {
    throw Error(ErrorKind::NoCommonDirection, "no vector with Q1(v,v) > 0 and Q2(v,v) > 0 found");
  }
  const Hat h = hat(pair);
  LevelCurve out;
  out.samples.resize(opts.n_angles);
  parallel_for(out.samples.size(), opts.threads, [&](std::size_t k) {
    const double theta = (static_cast<double>(k) + 0.5) * (0.5 * std::numbers::pi) / opts.n_angles;
    out.samples[k] = shoot(pair, h, theta, opts);
  });
  for (int k = 0; k < opts.n_angles; ++k) {
    if (!out.samples[k].in_gamma_tilde) continue;
    if (out.first < 0) out.first = k;
    if (out.last >= 0 && out.last != k - 1) out.contiguous = false;
    out.last = k;
  }
  if (out.first < 0 || !opts.refine_endpoints) return out;

  // Bisection on membership between theta_out (not in Gamma~) and theta_in.
  auto locate = [&](double theta_out, double theta_in) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (theta_out + theta_in);
      (shoot(pair, h, mid, opts).in_gamma_tilde ? theta_in : theta_out) = mid;
    }
    return shoot(pair, h, theta_in, opts);
  };
  const double right = 0.5 * std::numbers::pi;
  if (out.first > 0) {
    out.start = locate(out.samples[out.first - 1].theta, out.samples[out.first].theta);
  } else {
    const auto axis = shoot(pair, h, 0.0, opts);
    out.start = axis.in_gamma_tilde ? axis : locate(0.0, out.samples[0].theta);
  }
  if (out.last + 1 < opts.n_angles) {
    out.end = locate(out.samples[out.last + 1].theta, out.samples[out.last].theta);
  } else {
    const auto axis = shoot(pair, h, right, opts);
    out.end = axis.in_gamma_tilde ? axis : locate(right, out.samples[out.last].theta);
  }
  return out;
}

double proportionality_defect(const PairState& pair, double* mu) {
  const Hat h = hat(pair);
  const double q22 = h.q2.squaredNorm();
  const double q12 = (h.q1.adjoint() * h.q2).trace().real();
  const double m = q22 > 0.0 ? q12 / q22 : 0.0;
  if (mu) *mu = m;
  const double n1 = h.q1.norm();
  if (n1 == 0.0) return 1.0;
  return (h.q1 - m * h.q2).norm() / n1;
}

PairMetric pair_metric(const PairState& pair, const PairOptions& opts) {
  PairState work = pair;
  if (work.witness) {
    const CVector& v = *work.witness;
    if (!(work.q1.value(v) > 0.0 && work.q2.value(v) > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "supplied witness is not a common positive direction");
    }
  } else {
    work.witness = find_common_direction(work, opts.common_trials, opts.seed);
    if (!work.witness) throw Error(ErrorKind::NoCommonDirection, "no common positive direction found");
  }

  PairMetric out;
  out.proportionality_defect = proportionality_defect(work, &out.mu);
  if (out.proportionality_defect > opts.tau_prop && out.proportionality_defect < opts.near_prop_warn) {
    std::ostringstream os;
    os << "nearly proportional pair (defect " << out.proportionality_defect << "); Gamma~ is numerically flat";
    out.warnings.push_back(os.str());
  }

  if (opts.detect_proportional && out.proportionality_defect <= opts.tau_prop) {
    if (!(out.mu > 0.0)) throw Error(ErrorKind::NoCommonDirection, "Q1 = mu Q2 with mu <= 0");
    out.proportional = true;
    const Hat h = hat(work);
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(h.q2, Eigen::EigenvaluesOnly);
    const RVector nu = es.eigenvalues();
    const double c_max = 1.0 / nu(nu.size() - 1);
    const double level = opts.trace.level;
    auto f = [&](double c) { return -(1.0 - c * nu.array()).log().sum(); };
    double lo = 0.0, hi = 0.5 * c_max;
    for (int k = 2; f(hi) < level && k < 60; ++k) hi = c_max * (1.0 - std::ldexp(1.0, -k));
    if (f(hi) < level) throw Error(ErrorKind::LevelNotReached, "level not reached on the proportional line");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (f(mid) < level ? lo : hi) = mid;
    }
    out.gamma = {lo / (2.0 * out.mu), lo / 2.0};
  } else {
    const LevelCurve curve = trace_level_curve(work, opts.trace);
    if (curve.first < 0) {
      throw Error(ErrorKind::CertificateFailed, "no sample of the level curve has both traces positive");
    }
    std::vector<LevelCurveSample> poly;
    if (curve.start) poly.push_back(*curve.start);
    for (int k = curve.first; k <= curve.last; ++k) poly.push_back(curve.samples[k]);
    if (curve.end) poly.push_back(*curve.end);
    if (poly.size() == 1) {
      out.gamma = poly.front().x;
    } else {
      std::vector<double> cum{0.0};
      for (std::size_t k = 0; k + 1 < poly.size(); ++k) {
        const auto& a = poly[k].x;
        const auto& b = poly[k + 1].x;
        cum.push_back(cum.back() + std::hypot(b[0] - a[0], b[1] - a[1]));
      }
      const double half = 0.5 * cum.back();
      std::size_t seg = 0;
      while (seg + 2 < cum.size() && cum[seg + 1] < half) ++seg;
      const double len = cum[seg + 1] - cum[seg];
      const double frac = len > 0.0 ? (half - cum[seg]) / len : 0.0;
      const double theta = poly[seg].theta + frac * (poly[seg + 1].theta - poly[seg].theta);
      out.gamma = shoot_ray(work, theta, opts.trace).x;
    }
  }

  out.metric = MetricMatrix(HermitianMatrix(deformed_metric(work, out.gamma), 1e-9));
  out.traces = {core::trace_wrt(work.q1, out.metric), core::trace_wrt(work.q2, out.metric)};
  if (!(out.traces[0] > 0.0 && out.traces[1] > 0.0) || !(out.gamma[0] > 0.0 && out.gamma[1] > 0.0)) {
    std::ostringstream os;
    os << "traces (" << out.traces[0] << ", " << out.traces[1] << ") at gamma = (" << out.gamma[0] << ", "
       << out.gamma[1] << ")";
    throw Error(ErrorKind::CertificateFailed, os.str());
  }
  return out;
}

FieldResult field_metric_top_degree(const FormField& field, const std::string& q1, const std::string& q2,
                                    const PairOptions& opts, bool smooth, bool throw_on_failure) {
  const std::size_t n = field.size();
  const int d = field.dim();
  FieldResult res;
  res.points.resize(n);
  PairOptions inner = opts;
  inner.trace.threads = 1;
  parallel_for(n, opts.trace.threads, [&](std::size_t i) {
    try {
      const PairState pair(field.form(i, q1), field.form(i, q2), field.base_metric(i));
      PairOptions po = inner;
      po.seed = opts.seed + static_cast<unsigned>(i) * 7919u;
      res.points[i] = pair_metric(pair, po);
    } catch (const Error& e) {
      if (!e.point_id().empty()) throw;
      throw Error(e.kind(), e.what(), field.point(i).id);
    }
  });
  res.metrics.reserve(n);
  for (const auto& p : res.points) res.metrics.push_back(p.metric);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : field.neighbors(i)) {
      const auto& a = res.points[i].gamma;
      const auto& b = res.points[j].gamma;
      res.max_adjacent_jump = std::max(res.max_adjacent_jump, std::hypot(a[0] - b[0], a[1] - b[1]));
    }
  }
  std::string tag = "gamma";
  if (smooth && field.has_adjacency()) {
    std::vector<MetricMatrix> smoothed(n);
    for (std::size_t i = 0; i < n; ++i) {
      CMatrix sum = res.metrics[i].matrix();
      for (std::size_t j : field.neighbors(i)) sum += res.metrics[j].matrix();
      smoothed[i] = MetricMatrix(HermitianMatrix(sum / static_cast<double>(field.neighbors(i).size() + 1), 1e-9));
    }
    res.metrics = std::move(smoothed);
    tag = "gamma (smoothed)";
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& name : {q1, q2}) {
      res.certificate.entries.push_back(certify(field.point(i).id, name, field.form(i, name), res.metrics[i], d, tag));
    }
  }
  if (throw_on_failure && !res.certificate.passed()) {
    const auto bad = res.certificate.failing_points();
    throw Error(ErrorKind::CertificateFailed, std::to_string(bad.size()) + " points fail", bad.front());
  }
  return res;
}

}  // namespace qpos::two_forms
