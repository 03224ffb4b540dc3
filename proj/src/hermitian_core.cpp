#include "qpos/hermitian_core.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpos/error.hpp"

namespace qpos::core {
namespace {

void check_dims(const HermitianMatrix& h, const MetricMatrix& g) {
  if (h.dim() != g.dim()) {
    std::ostringstream os;
    os << "form has dimension " << h.dim() << ", metric has " << g.dim();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

void check_q(int q, int d) {
  if (q < 1 || q > d) {
    std::ostringstream os;
    os << "q = " << q << " outside [1, " << d << "]";
    throw Error(ErrorKind::QOutOfRange, os.str());
  }
}

// g^{-1/2} from the eigendecomposition of g.
CMatrix inverse_sqrt(const MetricMatrix& g) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g.matrix());
  const RVector& s = es.eigenvalues();
  if (!(s(0) > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "metric lost definiteness");
  const RVector inv = s.array().rsqrt();
  return es.eigenvectors() * inv.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix reduced(const HermitianMatrix& h, const CMatrix& w) {
  CMatrix c = w * h.matrix() * w;  // w is Hermitian
  return 0.5 * (c + c.adjoint());
}

}  // namespace

SpectrumWrt spectrum_wrt(const HermitianMatrix& h, const MetricMatrix& g) {
  check_dims(h, g);
  const CMatrix w = inverse_sqrt(g);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(reduced(h, w));
  return SpectrumWrt{es.eigenvalues(), w * es.eigenvectors()};
}

RVector eigenvalues_wrt(const HermitianMatrix& h, const MetricMatrix& g) {
  check_dims(h, g);
  const CMatrix w = inverse_sqrt(g);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(reduced(h, w), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double default_zero_threshold(const HermitianMatrix& h) { return 1e-10 * std::max(1.0, h.norm()); }

Inertia inertia(const HermitianMatrix& h, double zero_threshold) {
  if (!(zero_threshold >= 0.0)) throw Error(ErrorKind::InvalidArgument, "zero_threshold must be >= 0");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  Inertia out;
  out.zero_threshold = zero_threshold;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l > zero_threshold) {
      ++out.n_plus;
    } else if (l < -zero_threshold) {
      ++out.n_minus;
    } else {
      ++out.n_zero;
    }
  }
  return out;
}

Inertia inertia(const HermitianMatrix& h) { return inertia(h, default_zero_threshold(h)); }

double trace_wrt(const HermitianMatrix& h, const MetricMatrix& g) {
  return eigenvalues_wrt(h, g).sum();
}

double basis_trace(const HermitianMatrix& h, const CMatrix& basis) {
  if (basis.rows() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "basis rows");
  double s = 0.0;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) s += h.value(basis.col(k));
  return s;
}

double q_min_sum(const HermitianMatrix& h, const MetricMatrix& g, int q) {
  check_dims(h, g);
  check_q(q, h.dim());
  return eigenvalues_wrt(h, g).head(q).sum();
}

double max_subspace_trace(const HermitianMatrix& h, const MetricMatrix& g, int q) {
  check_dims(h, g);
  check_q(q, h.dim());
  return eigenvalues_wrt(h, g).tail(q).sum();
}

bool strictly_q_positive(const HermitianMatrix& h, const MetricMatrix& g, int q, double floor) {
  return q_min_sum(h, g, q) > floor;
}

double restricted_trace(const HermitianMatrix& h, const MetricMatrix& g, const Subspace& w) {
  check_dims(h, g);
  if (w.ambient_dim() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "subspace ambient dimension");
  const CMatrix gram = w.basis().adjoint() * g.matrix() * w.basis();
  const double defect = max_abs(gram - CMatrix::Identity(w.dim(), w.dim()));
  if (!(defect <= kOrthTol)) {
    std::ostringstream os;
    os << "basis is not orthonormal for the given metric (defect " << defect << ")";
    throw Error(ErrorKind::BasisNotOrthonormal, os.str());
  }
  return basis_trace(h, w.basis());
}

double projection_dim_sum(const Subspace& v, const Subspace& w) {
  if (v.ambient_dim() != w.ambient_dim()) {
    throw Error(ErrorKind::AmbientMismatch, "subspaces live in different ambient dimensions");
  }
  const double metric_gap = max_abs(v.metric().matrix() - w.metric().matrix());
  if (metric_gap > kHermTol * std::max(1.0, max_abs(v.metric().matrix()))) {
    throw Error(ErrorKind::AmbientMismatch, "subspaces are orthonormal for different inner products");
  }
  const CMatrix& g = v.metric().matrix();
  const CMatrix pv = v.projector();
  double s = 0.0;
  for (Eigen::Index k = 0; k < w.basis().cols(); ++k) {
    const CVector p = pv * w.basis().col(k);
    s += p.dot(g * p).real();
  }
  return s;
}

std::pair<double, double> complement_sum_identity(std::span<const double> lambdas, int q) {
  const int m = static_cast<int>(lambdas.size());
  if (q < 1 || q > m - 1) {
    std::ostringstream os;
    os << "q = " << q << " outside [1, " << m - 1 << "]";
    throw Error(ErrorKind::QOutOfRange, os.str());
  }
  double head = 0.0, all = 0.0, tail = 0.0;
  for (int j = 0; j < m; ++j) {
    all += lambdas[j];
    if (j < q) {
      head += lambdas[j];
    } else {
      tail += lambdas[j];
    }
  }
  return {head - all, -tail};
}

}  // namespace qpos::core
