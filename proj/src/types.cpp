#include "qpos/types.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpos/error.hpp"

namespace qpos {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::QOutOfRange: return "QOutOfRange";
    case ErrorKind::BasisNotOrthonormal: return "BasisNotOrthonormal";
    case ErrorKind::AmbientMismatch: return "AmbientMismatch";
    case ErrorKind::NearSingularResolvent: return "NearSingularResolvent";
    case ErrorKind::EigenvalueOnContour: return "EigenvalueOnContour";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::HypothesisViolated: return "HypothesisViolated";
    case ErrorKind::DenominatorNonpositive: return "DenominatorNonpositive";
    case ErrorKind::NoSpectralGap: return "NoSpectralGap";
    case ErrorKind::NotProjector: return "NotProjector";
    case ErrorKind::CertificateFailed: return "CertificateFailed";
    case ErrorKind::NotPositiveOnV: return "NotPositiveOnV";
    case ErrorKind::NoCommonDirection: return "NoCommonDirection";
    case ErrorKind::LevelNotReached: return "LevelNotReached";
    case ErrorKind::FrameInvalid: return "FrameInvalid";
    case ErrorKind::ZqViolated: return "ZqViolated";
    case ErrorKind::BoundNotFound: return "BoundNotFound";
    case ErrorKind::VanishingField: return "VanishingField";
    case ErrorKind::ZeroRepresentative: return "ZeroRepresentative";
    case ErrorKind::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string point_id)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message +
                         (point_id.empty() ? "" : " [point " + point_id + "]")),
      kind_(kind),
      point_id_(std::move(point_id)) {}

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double op_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

HermitianMatrix::HermitianMatrix(const CMatrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << "expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  const double scale = std::max(1.0, max_abs(m));
  const double defect = max_abs(m - m.adjoint());
  if (!(defect <= tol * scale)) {
    std::ostringstream os;
    os << "hermiticity defect " << defect << " exceeds " << tol * scale;
    throw Error(ErrorKind::NotHermitian, os.str());
  }
  m_ = 0.5 * (m + m.adjoint());
}

HermitianMatrix HermitianMatrix::identity(int d) {
  return HermitianMatrix(CMatrix::Identity(d, d));
}

HermitianMatrix HermitianMatrix::zero(int d) { return HermitianMatrix(CMatrix::Zero(d, d)); }

HermitianMatrix HermitianMatrix::diagonal(const RVector& diag) {
  return HermitianMatrix(CMatrix(diag.cast<cplx>().asDiagonal()));
}

HermitianMatrix HermitianMatrix::diagonal(std::initializer_list<double> diag) {
  RVector v(static_cast<Eigen::Index>(diag.size()));
  Eigen::Index i = 0;
  for (double x : diag) v(i++) = x;
  return diagonal(v);
}

double HermitianMatrix::value(const CVector& u) const { return u.dot(m_ * u).real(); }

cplx HermitianMatrix::form(const CVector& u, const CVector& v) const { return v.dot(m_ * u); }

double HermitianMatrix::norm() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

HermitianMatrix HermitianMatrix::operator+(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw Error(ErrorKind::DimensionMismatch, "form sum");
  return HermitianMatrix(m_ + other.m_);
}

HermitianMatrix HermitianMatrix::operator-(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw Error(ErrorKind::DimensionMismatch, "form difference");
  return HermitianMatrix(m_ - other.m_);
}

HermitianMatrix HermitianMatrix::operator-() const { return HermitianMatrix(CMatrix(-m_)); }

HermitianMatrix HermitianMatrix::scaled(double s) const { return HermitianMatrix(CMatrix(s * m_)); }

HermitianMatrix HermitianMatrix::congruence(const CMatrix& a) const {
  if (a.rows() != dim()) throw Error(ErrorKind::DimensionMismatch, "congruence frame");
  CMatrix c = a.adjoint() * m_ * a;
  return HermitianMatrix(CMatrix(0.5 * (c + c.adjoint())), 1e-8);
}

HermitianMatrix operator*(double s, const HermitianMatrix& h) { return h.scaled(s); }

MetricMatrix::MetricMatrix(const HermitianMatrix& h, double pd_tol) : h_(h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
  const double smallest = es.eigenvalues()(0);
  if (!(smallest > pd_tol)) {
    std::ostringstream os;
    os << "smallest eigenvalue " << smallest << " is not above " << pd_tol;
    throw Error(ErrorKind::NotPositiveDefinite, os.str());
  }
}

MetricMatrix MetricMatrix::identity(int d) { return MetricMatrix(HermitianMatrix::identity(d)); }

Subspace::Subspace(CMatrix basis, MetricMatrix metric, double tol)
    : basis_(std::move(basis)), metric_(std::move(metric)) {
  if (basis_.rows() != metric_.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "subspace basis and metric dimensions differ");
  }
  if (basis_.cols() == 0 || basis_.cols() > basis_.rows()) {
    throw Error(ErrorKind::InvalidArgument, "subspace dimension out of range");
  }
  const CMatrix gram = basis_.adjoint() * metric_.matrix() * basis_;
  const CMatrix id = CMatrix::Identity(basis_.cols(), basis_.cols());
  const double defect = max_abs(gram - id);
  if (!(defect <= tol)) {
    std::ostringstream os;
    os << "Gram matrix deviates from identity by " << defect;
    throw Error(ErrorKind::BasisNotOrthonormal, os.str());
  }
}

Subspace Subspace::orthonormalize(const CMatrix& vectors, const MetricMatrix& metric) {
  if (vectors.rows() != metric.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "vectors and metric dimensions differ");
  }
  const CMatrix& g = metric.matrix();
  CMatrix q(vectors.rows(), vectors.cols());
  double scale = 0.0;
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    scale = std::max(scale, std::sqrt(std::max(0.0, vectors.col(j).dot(g * vectors.col(j)).real())));
  }
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    CVector v = vectors.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) v -= q.col(i) * q.col(i).dot(g * v);
    }
    const double nrm = std::sqrt(std::max(0.0, v.dot(g * v).real()));
    if (!(nrm > 1e-12 * std::max(1.0, scale))) {
      throw Error(ErrorKind::InvalidArgument, "subspace vectors are linearly dependent");
    }
    q.col(j) = v / nrm;
  }
  return Subspace(q, metric);
}

CMatrix Subspace::projector() const { return basis_ * basis_.adjoint() * metric_.matrix(); }

}  // namespace qpos
