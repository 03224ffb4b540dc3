#include "qpos/metric_subbundle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/parallel.hpp"

namespace qpos::subbundle {

AdaptedBlocks adapted_blocks(const HermitianMatrix& h, const Subspace& v) {
  const int d = v.ambient_dim(), k = v.dim();
  if (h.dim() != d) throw Error(ErrorKind::DimensionMismatch, "form and subspace dimensions differ");
  // In coordinates y = gamma^{1/2} x the basis is orthonormal for the identity,
  // so a full QR gives the complement.
  const Eigen::SelfAdjointEigenSolver<CMatrix> ge(v.metric().matrix());
  const CMatrix root = ge.operatorSqrt();
  const CMatrix inv_root = ge.operatorInverseSqrt();
  const CMatrix y = root * v.basis();
  Eigen::HouseholderQR<CMatrix> qr(y);
  const CMatrix q = qr.householderQ() * CMatrix::Identity(d, d);
  AdaptedBlocks b;
  b.rank = k;
  b.frame.resize(d, d);
  b.frame.leftCols(k) = v.basis();
  b.frame.rightCols(d - k) = inv_root * q.rightCols(d - k);
  const CMatrix m = b.frame.adjoint() * h.matrix() * b.frame;
  b.vv = m.topLeftCorner(k, k);
  b.pp = m.bottomRightCorner(d - k, d - k);
  b.pv = m.bottomLeftCorner(d - k, k);
  return b;
}

PointConstants point_constants(const HermitianMatrix& h, const Subspace& v) {
  const auto b = adapted_blocks(h, v);
  PointConstants c;
  const Eigen::SelfAdjointEigenSolver<CMatrix> ev(b.vv, Eigen::EigenvaluesOnly);
  c.a1 = ev.eigenvalues()(0);
  if (b.pp.size() > 0) {
    const Eigen::SelfAdjointEigenSolver<CMatrix> ep(b.pp, Eigen::EigenvaluesOnly);
    c.a2 = ep.eigenvalues().cwiseAbs().maxCoeff();
    c.a3 = Eigen::JacobiSVD<CMatrix>(b.pv).singularValues()(0);
  }
  const RVector all = core::eigenvalues_wrt(h, v.metric());
  c.coarse = all.cwiseAbs().maxCoeff();
  return c;
}

PenaltyConstants compute_constants(const FormField& field, const std::string& form, int q, double safety,
                                   unsigned threads) {
  if (!(safety >= 1.0)) throw Error(ErrorKind::InvalidArgument, "safety factor must be >= 1");
  const std::size_t n = field.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty field");
  std::vector<PointConstants> pc(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& p = field.point(i);
    if (!p.subspace) throw Error(ErrorKind::InvalidArgument, "point has no subspace", p.id);
    pc[i] = point_constants(field.form(i, form), *p.subspace);
    if (pc[i].a3 > pc[i].coarse * (1.0 + 1e-12) + 1e-14) {
      throw Error(ErrorKind::InvalidArgument, "off-diagonal norm exceeds the spectral bound", p.id);
    }
  });
  PenaltyConstants c;
  c.form = form;
  c.q = q;
  c.safety = safety;
  c.A1 = pc[0].a1;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pc[i].a1 < c.A1) {
      c.A1 = pc[i].a1;
      worst = i;
    }
    c.A2 = std::max(c.A2, pc[i].a2);
    c.A3 = std::max(c.A3, pc[i].a3);
    c.coarse = std::max(c.coarse, pc[i].coarse);
  }
  if (!(c.A1 > 0.0)) {
    std::ostringstream os;
    os << "form '" << form << "' restricted to V has smallest eigenvalue " << c.A1;
    throw Error(ErrorKind::NotPositiveOnV, os.str(), field.point(worst).id);
  }
  c.A1 /= safety;
  c.A2 *= safety;
  c.A3 *= safety;
  return c;
}

double a1bis_margin(double a1, double a2, double a3, int q, double c) {
  return a1 - q * a2 / (1.0 + c) - 2.0 * q * a3 / std::sqrt(1.0 + c);
}

double choose_C(double a1, double a2, double a3, int q, double eta) {
  if (!(a1 > 0.0)) throw Error(ErrorKind::NotPositiveOnV, "A1 must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must lie in (0, 1)");
  const double rhs = a1 * (1.0 - eta);
  double s;
  if (a2 == 0.0 && a3 == 0.0) {
    return 0.0;
  } else if (a2 == 0.0) {
    s = rhs / (2.0 * q * a3);
  } else {
    // q A2 s^2 + 2 q A3 s - rhs = 0, positive root in cancellation-free form.
    const double b = q * a3;
    s = rhs / (b + std::sqrt(b * b + q * a2 * rhs));
  }
  if (s >= 1.0) return 0.0;
  return 1.0 / (s * s) - 1.0;
}

MetricMatrix build_penalty_metric(const MetricMatrix& gamma, const Subspace& v, double kappa) {
  if (!(kappa >= 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be nonnegative");
  if (kappa == 0.0) return gamma;
  const int d = gamma.dim();
  const CMatrix& g = gamma.matrix();
  const CMatrix perp = CMatrix::Identity(d, d) - v.basis() * v.basis().adjoint() * g;
  return MetricMatrix(HermitianMatrix(g + kappa * (perp.adjoint() * g * perp), 1e-9));
}

PositivityCertificate certify_all(const FormField& field, const std::vector<std::string>& forms, int q,
                                  const std::vector<MetricMatrix>& metrics, const std::string& tag,
                                  unsigned threads) {
  const std::size_t n = field.size(), m = forms.size();
  PositivityCertificate cert;
  cert.entries.resize(n * m);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      cert.entries[i * m + j] = certify(field.point(i).id, forms[j], field.form(i, forms[j]), metrics[i], q, tag);
    }
  });
  return cert;
}

Result synthesize_subbundle(const FormField& field, const std::vector<std::string>& forms, int q,
                            const Options& opts) {
  const int d = field.dim();
  if (forms.empty()) throw Error(ErrorKind::InvalidArgument, "at least one form is required");
  if (q < 1 || q > d) throw Error(ErrorKind::QOutOfRange, "q outside [1, d]");
  for (const auto& p : field.points()) {
    if (!p.subspace) throw Error(ErrorKind::InvalidArgument, "point has no subspace", p.id);
    if (p.subspace->dim() != d - q + 1) {
      throw Error(ErrorKind::InvalidArgument,
                  "subspace rank " + std::to_string(p.subspace->dim()) + " != d - q + 1 = " + std::to_string(d - q + 1),
                  p.id);
    }
  }
  Result res;
  for (const auto& name : forms) {
    auto c = compute_constants(field, name, q, opts.safety, opts.threads);
    c.C = choose_C(c.A1, c.A2, c.A3, q, opts.eta);
    res.kappa = std::max(res.kappa, c.C);
    res.constants.push_back(c);
  }
  const std::size_t n = field.size();
  res.metrics.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    res.metrics[i] = build_penalty_metric(field.base_metric(i), *field.point(i).subspace, res.kappa);
  });
  std::string tag = "penalty";
  if (opts.smooth && field.has_adjacency()) {
    std::vector<MetricMatrix> smoothed(n);
    for (std::size_t i = 0; i < n; ++i) {
      CMatrix sum = res.metrics[i].matrix();
      for (std::size_t j : field.neighbors(i)) sum += res.metrics[j].matrix();
      smoothed[i] = MetricMatrix(HermitianMatrix(sum / static_cast<double>(field.neighbors(i).size() + 1), 1e-9));
    }
    res.metrics = std::move(smoothed);
    tag = "penalty (smoothed)";
  }
  res.certificate = certify_all(field, forms, q, res.metrics, tag, opts.threads);
  if (opts.throw_on_failure && !res.certificate.passed()) {
    const auto bad = res.certificate.failing_points();
    throw Error(ErrorKind::CertificateFailed, std::to_string(bad.size()) + " points fail", bad.front());
  }
  return res;
}

}  // namespace qpos::subbundle
