#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qpos/geometry.hpp"
#include "qpos/types.hpp"

// phi_eps = phi + delta0 eps chi(rho / eps) near the boundary, with the
// constants delta0, B1, B2, eta and eps computed from boundary samples.
namespace qpos::geometry {

/// chi(t) = (t + 1)^3 / 3 for t > -1 and 0 otherwise: C^2, convex and
/// non-decreasing, chi'(0) = 1, chi''(0) = 2.
struct Chi {
  static double value(double t);
  static double d1(double t);
  static double d2(double t);
  static const char* formula() { return "chi(t) = (t+1)^3/3 for t > -1, 0 otherwise"; }
};

/// Orthonormal basis of a rank-k subspace on which both forms are positive
/// definite: the top k eigenvectors of s A + (1 - s) B for the s in a 33-point
/// grid that maximizes min(lambda_min(A|V), lambda_min(B|V)). `score` is that
/// minimum; a non-positive score means no candidate worked.
struct CommonSubspace {
  CMatrix basis;
  double score = 0.0;
  double s = 0.0;
};
CommonSubspace common_positive_subspace(const HermitianMatrix& a, const HermitianMatrix& b, int rank);

/// Complex Hessian of phi + delta0 eps chi(rho / eps) from the jets.
HermitianMatrix bumped_hessian(const Jet& phi, const Jet& rho, double delta0, double eps);

/// sup over tau > 0 of q_min_sum(K + tau b b*, g0, q) / tau: every g0-orthonormal
/// q-frame with sum |b* t_j|^2 below this value has tr(K|W) > 0. Returns +inf
/// when K is already strictly q-positive.
double eta_bound(const HermitianMatrix& k, const CVector& b, const MetricMatrix& g0, int q);

struct BumpOptions {
  double delta_max = 1.0;
  double delta_fraction = 0.5;  // delta0 = fraction * largest admissible delta
  int delta_grid = 64;
  double eps0 = 1.0;
  double eps_factor = 0.5;      // eps = factor * min(bound, eps0)
  double control_multiplier = 10.0;
  int trace_samples = 100;
  int trace_frames = 100;
  double subbundle_eta = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct BumpClaim {
  int passed = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::vector<std::string> failing;
};

struct BumpReport {
  int n = 0, q = 0;
  std::size_t samples = 0;
  double delta_edge = 0.0;  // largest delta found by bisection
  double delta0 = 0.0;
  double B1 = 0.0, B2 = 0.0;
  double eta = 0.0;
  double eps_bound = 0.0;   // delta0 chi''(0) eta / (B1 + delta0 B2)
  double eps0 = 0.0;
  double eps = 0.0;
  double kappa = 0.0;       // penalty constant of the boundary metric h
  bool h_certified = false; // L and H_phi|T strictly q-positive w.r.t. h
  double min_common_score = 0.0;
  double hessian1_max_defect = 0.0;  // jet Hessian vs the three-term expansion
  BumpClaim claim1, claim2, claim3;
  int trace_frames = 0;
  double trace_max_defect = 0.0;
  int frames_below_eta = 0, eta_violations = 0;
  int frames_above_eta = 0, bound_violations = 0;
  double control_eps = 0.0;
  BumpClaim control_claim3;

  bool passed() const {
    return claim1.failing.empty() && claim2.failing.empty() && claim3.failing.empty() && eta_violations == 0 &&
           bound_violations == 0 && trace_max_defect <= 1e-10;
  }
};

/// Runs the construction on boundary samples of `d` with weight
/// exhaustion_jet(d, .). h is the penalty metric for {L, H_phi|T} on a common
/// positive subbundle of rank n - q; g0 extends h by a unit normal.
/// Throws BoundNotFound when delta0 or eta falls below 1e-8.
BumpReport weight_bump(const Domain& d, const BoundarySampling& s, int q, const BumpOptions& opts = {});

}  // namespace qpos::geometry
