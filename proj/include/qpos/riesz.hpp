#pragma once

#include <string>
#include <vector>

#include "qpos/types.hpp"

// Spectral projectors of Hermitian matrices onto the eigenvalues enclosed by a
// disc, computed as a contour integral of the resolvent.
namespace qpos::riesz {

struct Disc {
  cplx center;
  double radius = 1.0;

  Disc() = default;
  Disc(cplx c, double r);
};

struct ProjectorResult {
  CMatrix matrix;
  int quad_nodes = 0;
  double separation = 0.0;  // min over eigenvalues of distance to the circle
  double idempotency_defect = 0.0;
  double hermiticity_defect = 0.0;
};

struct Options {
  /// Contours closer than tau_sep_rel * radius to an eigenvalue are rejected.
  double tau_sep_rel = 1e-6;
  unsigned threads = 1;
};

/// (zeta I - T)^{-1}. Throws NearSingularResolvent when zeta lies within
/// tau_sep of the spectrum.
CMatrix resolvent(const HermitianMatrix& t, cplx zeta, double tau_sep = 1e-8);

/// Distance from the spectrum of T to the boundary circle of `disc`.
double separation(const RVector& eigenvalues, const Disc& disc);

/// N-point trapezoid rule for (1/2 pi i) \oint (zeta I - T)^{-1} dzeta on the
/// circle, nodes at angles 2 pi (k + 1/2) / N. Summation order is fixed.
ProjectorResult riesz_projector(const HermitianMatrix& t, const Disc& disc, int nodes = 64,
                                const Options& opts = {});

/// Orthogonal projector onto eigenvectors whose eigenvalues lie inside.
CMatrix oracle_projector(const HermitianMatrix& t, const Disc& disc, double tau_sep_rel = 1e-6);

/// Trapezoid error for the given spectrum: max over eigenvalues of
/// rho^N / (1 + rho^N), rho = |lambda - c| / r inside and r / |lambda - c|
/// outside. With half-offset nodes this is the exact error magnitude for a
/// single eigenvalue (inside the rule returns 1 / (1 + rho^N)).
double predicted_error(const RVector& eigenvalues, const Disc& disc, int nodes);

/// Smallest node count (multiple of 8, at least 64) whose predicted error is
/// below `target`, capped at `max_nodes`.
int recommended_nodes(const RVector& eigenvalues, const Disc& disc, double target = 1e-14,
                      int max_nodes = 1 << 16);

struct ConvergencePoint {
  int nodes = 0;
  double error = 0.0;      // operator norm against the oracle
  double predicted = 0.0;  // predicted_error
};

std::vector<ConvergencePoint> quadrature_convergence(const HermitianMatrix& t, const Disc& disc,
                                                     const std::vector<int>& node_list,
                                                     const Options& opts = {});

std::string convergence_csv(const std::vector<ConvergencePoint>& points);

}  // namespace qpos::riesz
