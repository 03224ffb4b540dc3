#pragma once

#include <string>
#include <vector>

#include "qpos/form_field.hpp"
#include "qpos/types.hpp"

// Penalty metric for forms that are positive definite on a subbundle V of
// rank d - q + 1: h = gamma + kappa gamma(P_perp ., P_perp .).
namespace qpos::subbundle {

/// Blocks of H in a gamma-orthonormal frame adapted to V + V_perp.
struct AdaptedBlocks {
  CMatrix frame;  // columns: basis of V, then of V_perp; gamma-unitary
  int rank = 0;   // dim V
  CMatrix vv, pp, pv;
};

AdaptedBlocks adapted_blocks(const HermitianMatrix& h, const Subspace& v);

struct PointConstants {
  double a1 = 0.0;      // smallest eigenvalue of H on V
  double a2 = 0.0;      // largest |eigenvalue| of H on V_perp
  double a3 = 0.0;      // norm of the off-diagonal block = sup |H(z, w)|
  double coarse = 0.0;  // max |lambda^gamma(H)|, bounds a2 and a3
};

PointConstants point_constants(const HermitianMatrix& h, const Subspace& v);

struct PenaltyConstants {
  std::string form;
  int q = 0;
  double A1 = 0.0, A2 = 0.0, A3 = 0.0;
  double coarse = 0.0;  // max over points of the coarse bound
  double safety = 1.0;  // A1 / s, A2 s, A3 s
  double C = 0.0;
};

/// Min/max of the point constants over the field, then inflated by `safety`.
/// Throws NotPositiveOnV when H|V is not positive definite at some point.
PenaltyConstants compute_constants(const FormField& field, const std::string& form, int q, double safety = 1.0,
                                   unsigned threads = 1);

/// A1 - q A2 / (1 + C) - 2 q A3 / sqrt(1 + C).
double a1bis_margin(double a1, double a2, double a3, int q, double c);

/// Smallest C with a1bis_margin >= eta A1, via s = 1 / sqrt(1 + C).
double choose_C(double a1, double a2, double a3, int q, double eta = 0.05);

MetricMatrix build_penalty_metric(const MetricMatrix& gamma, const Subspace& v, double kappa);

struct Options {
  double eta = 0.05;
  double safety = 1.0;
  bool smooth = false;  // average h over 1-rings, then re-certify
  bool throw_on_failure = true;
  unsigned threads = 1;
};

struct Result {
  std::vector<PenaltyConstants> constants;  // one per form
  double kappa = 0.0;
  std::vector<MetricMatrix> metrics;
  PositivityCertificate certificate;
};

/// gamma is g0 at each point (identity when absent); every point must carry a
/// subspace of rank d - q + 1.
Result synthesize_subbundle(const FormField& field, const std::vector<std::string>& forms, int q,
                            const Options& opts = {});

/// Certifies every form at every point against the given metrics.
PositivityCertificate certify_all(const FormField& field, const std::vector<std::string>& forms, int q,
                                  const std::vector<MetricMatrix>& metrics, const std::string& tag,
                                  unsigned threads = 1);

}  // namespace qpos::subbundle
