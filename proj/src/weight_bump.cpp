#include "qpos/weight_bump.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/metric_subbundle.hpp"
#include "qpos/parallel.hpp"

namespace qpos::geometry {

double Chi::value(double t) { return t > -1.0 ? (t + 1.0) * (t + 1.0) * (t + 1.0) / 3.0 : 0.0; }
double Chi::d1(double t) { return t > -1.0 ? (t + 1.0) * (t + 1.0) : 0.0; }
double Chi::d2(double t) { return t > -1.0 ? 2.0 * (t + 1.0) : 0.0; }

CommonSubspace common_positive_subspace(const HermitianMatrix& a, const HermitianMatrix& b, int rank) {
  const int d = a.dim();
  if (rank < 1 || rank > d) throw Error(ErrorKind::InvalidArgument, "subspace rank out of range");
  CommonSubspace best;
  best.score = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 32; ++k) {
    const double s = k / 32.0;
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(s * a.matrix() + (1.0 - s) * b.matrix());
    const CMatrix v = es.eigenvectors().rightCols(rank);
    const Eigen::SelfAdjointEigenSolver<CMatrix> ea(v.adjoint() * a.matrix() * v, Eigen::EigenvaluesOnly);
    const Eigen::SelfAdjointEigenSolver<CMatrix> eb(v.adjoint() * b.matrix() * v, Eigen::EigenvaluesOnly);
    const double score = std::min(ea.eigenvalues()(0), eb.eigenvalues()(0));
    if (score > best.score) best = {v, score, s};
  }
  return best;
}

HermitianMatrix bumped_hessian(const Jet& phi, const Jet& rho, double delta0, double eps) {
  const Jet t = (1.0 / eps) * rho;
  const Jet c = compose(t, Chi::value(t.value), Chi::d1(t.value), Chi::d2(t.value));
  return (phi + (delta0 * eps) * c).hessian();
}

double eta_bound(const HermitianMatrix& k, const CVector& b, const MetricMatrix& g0, int q) {
  if (core::q_min_sum(k, g0, q) > 0.0) return std::numeric_limits<double>::infinity();
  const HermitianMatrix bb(CMatrix(b * b.adjoint()), 1e-9);
  auto ratio = [&](double lt) {
    const double tau = std::exp(lt);
    return core::q_min_sum(k + tau * bb, g0, q) / tau;
  };
  // Log-grid scan, then golden-section refinement around the best node.
  const double lo = std::log(1e-8), hi = std::log(1e14);
  const int nodes = 221;
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes; ++i) {
    const double v = ratio(lo + (hi - lo) * i / (nodes - 1));
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / (nodes - 1);
  double c = lo + (hi - lo) * std::min(nodes - 1, best + 1) / (nodes - 1);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
  double f1 = ratio(x1), f2 = ratio(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 > f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - gr * (c - a);
      f1 = ratio(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (c - a);
      f2 = ratio(x2);
    }
  }
  return std::max({best_v, f1, f2});
}

namespace {

struct PointData {
  Jet phi, rho;
  HermitianMatrix h_phi, h_rho;
  CMatrix frame;  // [tangent, transverse]
};

// Metric on T^{1,0}M extending h on the tangent frame by a unit normal.
MetricMatrix extend_metric(const MetricMatrix& h, const CMatrix& frame) {
  const int n = static_cast<int>(frame.rows());
  CMatrix blk = CMatrix::Zero(n, n);
  blk.topLeftCorner(n - 1, n - 1) = h.matrix();
  blk(n - 1, n - 1) = 1.0;
  // g0(X, X) = c* blk c with X = frame c, frame unitary.
  return MetricMatrix(HermitianMatrix(frame * blk * frame.adjoint(), 1e-9));
}

int count_above(const HermitianMatrix& h) {
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  const double thr = core::default_zero_threshold(h);
  return static_cast<int>((es.eigenvalues().array() > thr).count());
}

void record(BumpClaim& c, bool ok, double margin, const std::string& id) {
  c.min_margin = std::min(c.min_margin, margin);
  if (ok) {
    ++c.passed;
  } else {
    c.failing.push_back(id);
  }
}

}  // namespace

BumpReport weight_bump(const Domain& d, const BoundarySampling& s, int q, const BumpOptions& opts) {
  const int n = d.n;
  if (q < 1 || q > n - 1) throw Error(ErrorKind::QOutOfRange, "q outside [1, n - 1]");
  const std::size_t ns = s.samples.size();
  if (ns == 0) throw Error(ErrorKind::InvalidArgument, "no boundary samples");
  BumpReport rep;
  rep.n = n;
  rep.q = q;
  rep.samples = ns;
  rep.eps0 = opts.eps0;

  std::vector<PointData> pd(ns);
  parallel_for(ns, opts.threads, [&](std::size_t i) {
    const auto& smp = s.samples[i];
    PointData& p = pd[i];
    p.phi = exhaustion_jet(d, smp.point);
    p.rho = rho_jet(d, smp.point);
    p.h_phi = p.phi.hessian();
    p.h_rho = smp.hess_rho;
    p.frame.resize(n, n);
    p.frame.leftCols(n - 1) = smp.frame.tangent;
    p.frame.col(n - 1) = smp.frame.transverse;
  });

  // delta0: H_phi + delta H_rho keeps n - q + 1 positive eigenvalues.
  const int need = n - q + 1;
  auto admissible = [&](double delta) {
    for (std::size_t i = 0; i < ns; ++i) {
      if (count_above(pd[i].h_phi + delta * pd[i].h_rho) < need) return false;
    }
    return true;
  };
  if (!admissible(0.0)) {
    throw Error(ErrorKind::BoundNotFound, "the weight's Hessian has fewer than n - q + 1 positive eigenvalues");
  }
  double edge = opts.delta_max;
  if (!admissible(edge)) {
    double lo = 0.0, hi = edge;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (admissible(mid) ? lo : hi) = mid;
    }
    edge = lo;
  }
  // The bisection edge need not bound a connected interval; verify on a grid
  // and shrink below the first failure.
  for (bool again = true; again && edge > 0.0;) {
    again = false;
    for (int k = 1; k <= opts.delta_grid; ++k) {
      if (!admissible(edge * k / opts.delta_grid)) {
        edge = edge * (k - 1) / opts.delta_grid;
        again = true;
        break;
      }
    }
  }
  rep.delta_edge = edge;
  rep.delta0 = opts.delta_fraction * edge;
  if (!(rep.delta0 >= 1e-8)) throw Error(ErrorKind::BoundNotFound, "delta0 below 1e-8");
  const double delta0 = rep.delta0;

  // Boundary metric h: penalty metric for L and H_phi|T on a common positive
  // subbundle of rank n - q.
  std::vector<SamplePoint> pts(ns);
  rep.min_common_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ns; ++i) {
    const auto& smp = s.samples[i];
    const HermitianMatrix hphi_t = pd[i].h_phi.congruence(smp.frame.tangent);
    const auto cs = common_positive_subspace(smp.levi, hphi_t, n - q);
    rep.min_common_score = std::min(rep.min_common_score, cs.score);
    pts[i].id = smp.id;
    for (std::size_t j : s.adjacency[i]) pts[i].neighbors.push_back(s.samples[j].id);
    pts[i].forms.emplace("L", smp.levi);
    pts[i].forms.emplace("Hphi", hphi_t);
    pts[i].subspace = Subspace::orthonormalize(cs.basis, MetricMatrix::identity(n - 1));
  }
  const FormField tfield(n - 1, std::move(pts));
  subbundle::Options sopts;
  sopts.eta = opts.subbundle_eta;
  sopts.throw_on_failure = false;
  sopts.threads = opts.threads;
  const auto sb = subbundle::synthesize_subbundle(tfield, {"L", "Hphi"}, q, sopts);
  rep.kappa = sb.kappa;
  rep.h_certified = sb.certificate.passed();

  std::vector<MetricMatrix> g0(ns);
  std::vector<double> b1(ns), b2(ns), eta(ns), smax(ns);
  parallel_for(ns, opts.threads, [&](std::size_t i) {
    g0[i] = extend_metric(sb.metrics[i], pd[i].frame);
    b1[i] = std::max(core::max_subspace_trace(pd[i].h_phi, g0[i], q), core::max_subspace_trace(-pd[i].h_phi, g0[i], q));
    b2[i] = std::max(core::max_subspace_trace(pd[i].h_rho, g0[i], q), core::max_subspace_trace(-pd[i].h_rho, g0[i], q));
    const CVector& b = s.samples[i].frame.d_rho;
    eta[i] = eta_bound(pd[i].h_phi + delta0 * pd[i].h_rho, b, g0[i], q);
    // Largest possible sum |b* t_j|^2 over g0-orthonormal frames.
    smax[i] = b.dot(g0[i].matrix().ldlt().solve(b)).real();
  });
  rep.B1 = *std::max_element(b1.begin(), b1.end());
  rep.B2 = *std::max_element(b2.begin(), b2.end());
  rep.eta = *std::min_element(eta.begin(), eta.end());
  if (std::isinf(rep.eta)) rep.eta = *std::max_element(smax.begin(), smax.end());
  if (!(rep.eta >= 1e-8)) {
    const auto worst = std::min_element(eta.begin(), eta.end()) - eta.begin();
    throw Error(ErrorKind::BoundNotFound, "eta below 1e-8", s.samples[static_cast<std::size_t>(worst)].id);
  }
  const double chi2 = Chi::d2(0.0);
  const double denom = rep.B1 + delta0 * rep.B2;
  rep.eps_bound = denom > 0.0 ? delta0 * chi2 * rep.eta / denom : std::numeric_limits<double>::infinity();
  rep.eps = opts.eps_factor * std::min(rep.eps_bound, opts.eps0);
  rep.control_eps = opts.control_multiplier * rep.eps;
  const double eps = rep.eps;

  // Claims at every boundary sample.
  struct Row {
    int c1 = 0;
    double m1 = 0, m2 = 0, m3 = 0, m3c = 0, f2 = 0, f3 = 0, f3c = 0, hdef = 0;
  };
  std::vector<Row> rows(ns);
  parallel_for(ns, opts.threads, [&](std::size_t i) {
    const auto& smp = s.samples[i];
    const HermitianMatrix he = bumped_hessian(pd[i].phi, pd[i].rho, delta0, eps);
    Row& r = rows[i];
    // Expansion: H_phi + delta0 chi'(rho/eps) H_rho + delta0/eps chi''(rho/eps) drho drho*.
    const double t = pd[i].rho.value / eps;
    const CVector& b = smp.frame.d_rho;
    const CMatrix expansion = pd[i].h_phi.matrix() + delta0 * Chi::d1(t) * pd[i].rho.hess +
                              (delta0 / eps) * Chi::d2(t) * (b * b.adjoint());
    r.hdef = max_abs(he.matrix() - expansion) / std::max(1.0, he.norm());
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(he.matrix(), Eigen::EigenvaluesOnly);
    r.c1 = static_cast<int>((es.eigenvalues().array() > core::default_zero_threshold(he)).count());
    r.m1 = es.eigenvalues()(n - need);
    const HermitianMatrix he_t = he.congruence(smp.frame.tangent);
    r.m2 = core::q_min_sum(he_t, sb.metrics[i], q);
    r.f2 = default_floor(he_t);
    r.m3 = core::q_min_sum(he, g0[i], q);
    r.f3 = default_floor(he);
    const HermitianMatrix hc = bumped_hessian(pd[i].phi, pd[i].rho, delta0, rep.control_eps);
    r.m3c = core::q_min_sum(hc, g0[i], q);
    r.f3c = default_floor(hc);
  });
  for (std::size_t i = 0; i < ns; ++i) {
    const Row& r = rows[i];
    const auto& id = s.samples[i].id;
    rep.hessian1_max_defect = std::max(rep.hessian1_max_defect, r.hdef);
    record(rep.claim1, r.c1 >= need, r.m1, id);
    record(rep.claim2, r.m2 > r.f2, r.m2 - r.f2, id);
    record(rep.claim3, r.m3 > r.f3, r.m3 - r.f3, id);
    record(rep.control_claim3, r.m3c > r.f3c, r.m3c - r.f3c, id);
  }

  // Trace expansion on random g0-orthonormal q-frames at evenly spaced samples.
  const int ts = std::min<int>(opts.trace_samples, static_cast<int>(ns));
  struct TraceRow {
    double defect = 0;
    int below = 0, eta_bad = 0, above = 0, bound_bad = 0;
  };
  std::vector<TraceRow> trows(static_cast<std::size_t>(ts));
  const double lower = -rep.B1 - delta0 * rep.B2;
  parallel_for(static_cast<std::size_t>(ts), opts.threads, [&](std::size_t k) {
    const std::size_t i = k * ns / static_cast<std::size_t>(ts);
    const auto& smp = s.samples[i];
    const HermitianMatrix he = bumped_hessian(pd[i].phi, pd[i].rho, delta0, eps);
    const CVector& b = smp.frame.d_rho;
    std::mt19937_64 rng(opts.seed * 1000003ULL + i);
    std::normal_distribution<double> gauss;
    TraceRow& tr = trows[k];
    for (int f = 0; f < opts.trace_frames; ++f) {
      CMatrix raw(n, q);
      for (int a = 0; a < n; ++a) {
        for (int c = 0; c < q; ++c) raw(a, c) = cplx(gauss(rng), gauss(rng));
      }
      if (f % 2 == 1) {
        // Frames close to the tangent space probe the eta side.
        const double tilt = std::pow(10.0, -6.0 * (f % 7) / 6.0);
        raw = smp.frame.tangent * smp.frame.tangent.adjoint() * raw + tilt * smp.frame.transverse * raw.row(0);
      }
      const Subspace w = Subspace::orthonormalize(raw, g0[i]);
      const CMatrix& t = w.basis();
      double lhs = 0.0, tphi = 0.0, trho = 0.0, sdr = 0.0;
      for (int c = 0; c < q; ++c) {
        lhs += he.value(t.col(c));
        tphi += pd[i].h_phi.value(t.col(c));
        trho += pd[i].h_rho.value(t.col(c));
        sdr += std::norm(b.dot(t.col(c)));
      }
      const double rhs = tphi + delta0 * trho + (delta0 / eps) * chi2 * sdr;
      tr.defect = std::max(tr.defect, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
      const double base = tphi + delta0 * trho;
      if (sdr < rep.eta) {
        ++tr.below;
        if (!(base > 0.0)) ++tr.eta_bad;
      } else {
        ++tr.above;
        if (!(base >= lower * (1.0 + 1e-12)) || !(lhs > 0.0)) ++tr.bound_bad;
      }
    }
  });
  rep.trace_frames = ts * opts.trace_frames;
  for (const auto& tr : trows) {
    rep.trace_max_defect = std::max(rep.trace_max_defect, tr.defect);
    rep.frames_below_eta += tr.below;
    rep.eta_violations += tr.eta_bad;
    rep.frames_above_eta += tr.above;
    rep.bound_violations += tr.bound_bad;
  }
  return rep;
}

}  // namespace qpos::geometry
