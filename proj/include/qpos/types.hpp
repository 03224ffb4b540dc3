#pragma once

#include <Eigen/Dense>
#include <complex>
#include <initializer_list>

namespace qpos {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kHermTol = 1e-12;
inline constexpr double kPdTol = 1e-10;
inline constexpr double kOrthTol = 1e-10;

/// A Hermitian form in a fixed frame. The matrix M acts as H(u, v) = v* M u,
/// so M(j, k) = H(e_k, e_j) and M(j, k) = conj(M(k, j)).
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  /// Validates hermiticity to `tol` relative to max(1, max|M_jk|) and stores
  /// the exactly Hermitian part (M + M*)/2.
  explicit HermitianMatrix(const CMatrix& m, double tol = kHermTol);

  static HermitianMatrix identity(int d);
  static HermitianMatrix zero(int d);
  static HermitianMatrix diagonal(const RVector& diag);
  static HermitianMatrix diagonal(std::initializer_list<double> diag);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }

  /// H(u, u), real by construction.
  double value(const CVector& u) const;
  /// H(u, v) = v* M u.
  cplx form(const CVector& u, const CVector& v) const;

  /// Largest absolute eigenvalue (w.r.t. the identity metric).
  double norm() const;

  HermitianMatrix operator+(const HermitianMatrix& other) const;
  HermitianMatrix operator-(const HermitianMatrix& other) const;
  HermitianMatrix operator-() const;
  HermitianMatrix scaled(double s) const;

  /// Congruence A* M A: the matrix of the same form in the frame given by the
  /// columns of A.
  HermitianMatrix congruence(const CMatrix& a) const;

 private:
  CMatrix m_;
};

HermitianMatrix operator*(double s, const HermitianMatrix& h);

/// A positive-definite Hermitian form: an inner product g(u, v) = v* G u.
class MetricMatrix {
 public:
  MetricMatrix() = default;
  explicit MetricMatrix(const HermitianMatrix& h, double pd_tol = kPdTol);
  explicit MetricMatrix(const CMatrix& m, double pd_tol = kPdTol)
      : MetricMatrix(HermitianMatrix(m), pd_tol) {}

  static MetricMatrix identity(int d);

  int dim() const { return h_.dim(); }
  const CMatrix& matrix() const { return h_.matrix(); }
  const HermitianMatrix& form() const { return h_; }

  cplx inner(const CVector& u, const CVector& v) const { return h_.form(u, v); }
  double norm2(const CVector& u) const { return h_.value(u); }

  bool operator==(const MetricMatrix& other) const { return h_.matrix() == other.h_.matrix(); }

 private:
  HermitianMatrix h_;
};

/// Ascending eigenvalues of a pencil (H, g) with g-orthonormal eigenvectors
/// stored as columns.
struct SpectrumWrt {
  RVector eigenvalues;
  CMatrix eigenvectors;
};

struct Inertia {
  int n_plus = 0;
  int n_minus = 0;
  int n_zero = 0;
  double zero_threshold = 0.0;

  int dim() const { return n_plus + n_minus + n_zero; }
  bool operator==(const Inertia& o) const {
    return n_plus == o.n_plus && n_minus == o.n_minus && n_zero == o.n_zero;
  }
};

/// A subspace with a basis (columns) orthonormal w.r.t. `metric`.
class Subspace {
 public:
  Subspace() = default;
  /// Takes an already orthonormal basis; throws BasisNotOrthonormal otherwise.
  Subspace(CMatrix basis, MetricMatrix metric, double tol = kOrthTol);

  /// Gram-Schmidt (twice) in `metric` over the columns of `vectors`.
  static Subspace orthonormalize(const CMatrix& vectors, const MetricMatrix& metric);

  int ambient_dim() const { return static_cast<int>(basis_.rows()); }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const CMatrix& basis() const { return basis_; }
  const MetricMatrix& metric() const { return metric_; }

  /// Metric-orthogonal projector onto the subspace, as a matrix acting on
  /// coordinate vectors: P = B B* G.
  CMatrix projector() const;

 private:
  CMatrix basis_;
  MetricMatrix metric_;
};

// Small matrix helpers shared across modules.
double op_norm(const CMatrix& m);
double max_abs(const CMatrix& m);

}  // namespace qpos
