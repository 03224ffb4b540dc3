#pragma once

#include <span>
#include <utility>

#include "qpos/types.hpp"

/// Spectral primitives for Hermitian forms measured against a metric.
///
/// Everything here works on the pencil (H, g): eigenpairs solve H v = lambda g v.
/// Results depend only on eigenvalue sums and counts, never on the order of
/// eigenvectors within a cluster of equal eigenvalues.
namespace qpos::core {

/// Eigenpairs of H relative to g, ascending, with g-orthonormal eigenvectors.
/// The pencil is reduced by congruence with g^{-1/2}.
SpectrumWrt spectrum_wrt(const HermitianMatrix& h, const MetricMatrix& g);

/// Eigenvalues only (same reduction).
RVector eigenvalues_wrt(const HermitianMatrix& h, const MetricMatrix& g);

/// 1e-10 * max(1, ||H||).
double default_zero_threshold(const HermitianMatrix& h);

/// Signs of the eigenvalues of H against the identity metric.
Inertia inertia(const HermitianMatrix& h, double zero_threshold);
Inertia inertia(const HermitianMatrix& h);

/// Sum of all eigenvalues of H w.r.t. g.
double trace_wrt(const HermitianMatrix& h, const MetricMatrix& g);

/// sum_k H(t_k, t_k) over the columns of `basis`; the caller guarantees the
/// columns are orthonormal for the intended metric.
double basis_trace(const HermitianMatrix& h, const CMatrix& basis);

/// Sum of the q smallest eigenvalues; H is strictly q-positive iff > 0.
double q_min_sum(const HermitianMatrix& h, const MetricMatrix& g, int q);

/// Sum of the q largest eigenvalues: the largest trace of H restricted to a
/// q-dimensional subspace.
double max_subspace_trace(const HermitianMatrix& h, const MetricMatrix& g, int q);

bool strictly_q_positive(const HermitianMatrix& h, const MetricMatrix& g, int q, double floor = 0.0);

/// Trace of H restricted to W. W must be orthonormal w.r.t. g.
double restricted_trace(const HermitianMatrix& h, const MetricMatrix& g, const Subspace& w);

/// sum_k ||pi_V t_k||^2 over the basis {t_k} of W, which equals dim(V ∩ W).
double projection_dim_sum(const Subspace& v, const Subspace& w);

/// For eigenvalue lists lambda_1..lambda_{n-1}: returns
/// (sum_{k<=q} lambda - sum_all lambda, -sum_{k>q} lambda). The two agree.
std::pair<double, double> complement_sum_identity(std::span<const double> lambdas, int q);

}  // namespace qpos::core
