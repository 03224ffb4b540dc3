#pragma once

#include <string>
#include <vector>

#include "qpos/form_field.hpp"
#include "qpos/types.hpp"

// Inductive metric construction: stratify the sample points by the number of
// negative eigenvalues of S, then inflate the metric along the negative
// eigenspaces one stratum at a time until S is strictly q~-positive.
namespace qpos::single {

struct Stratification {
  int q_tilde = 0;
  std::vector<int> nu_minus;    // negative eigenvalue count per point
  std::vector<char> anchored;   // in F or in its 1-ring neighborhood: metric stays g0
  std::vector<Inertia> inertia;

  /// V_r: nu_minus <= r, or anchored.
  bool in_V(std::size_t i, int r) const { return anchored[i] || nu_minus[i] <= r; }
  /// U_r = V_r \ V_{r-1}.
  bool in_U(std::size_t i, int r) const { return !anchored[i] && nu_minus[i] == r; }
};

struct Options {
  double theta = 0.1;      // f = max(0, (1 + theta) phi)
  bool smooth = false;     // one pass of neighbor averaging on f
  bool riesz_check = true; // compute each projector twice and record the gap
  bool throw_on_failure = true;
  unsigned threads = 1;
};

/// Counts nu_- per point (identity metric, default zero threshold) and checks
/// the hypothesis of at least d - q~ + 1 positive eigenvalues. F points keep
/// g0; their 1-ring neighbors are anchored too when S is already strictly
/// q~-positive there w.r.t. their own g0.
Stratification stratify(const FormField& field, const std::string& form, int q_tilde);

/// phi = -sum_{j<=q~} lambda_j / sum_{r<j<=q~} lambda_j, eigenvalues w.r.t. g.
double phi(const RVector& eigenvalues, int r, int q_tilde, const std::string& point_id = {});

/// f = max(0, (1 + theta) phi).
double choose_f(const RVector& eigenvalues, int r, int q_tilde, double theta, const std::string& point_id = {});

/// g-orthogonal projector onto the eigenvectors of the r most negative
/// eigenvalues of S w.r.t. g, from outer products of g-orthonormal eigenvectors.
CMatrix negative_projector(const HermitianMatrix& s, const MetricMatrix& g, int r);

/// Same projector from a Riesz contour integral of g^{-1/2} S g^{-1/2} over the
/// disc through alpha < lambda_1 and beta = lambda_r / 2.
CMatrix negative_projector_riesz(const HermitianMatrix& s, const MetricMatrix& g, int r, int* nodes_used = nullptr);

/// g_r(X, Y) = g(X, Y) + f g(PX, PY).
MetricMatrix update_metric(const MetricMatrix& g, const CMatrix& p, double f);

struct StageRecord {
  int r = 0;
  std::size_t points_updated = 0;
  double max_f = 0.0;
  double max_projector_gap = 0.0;  // eigenvector vs Riesz path
  double max_rescale_error = 0.0;  // predicted vs actual eigenvalues after update
  double min_sum_on_V = 0.0;       // smallest q~-sum over V_r after the stage
};

struct Result {
  std::vector<MetricMatrix> metrics;
  std::vector<double> f_total;  // product of (1 + f) over stages, minus one
  Stratification strata;
  std::vector<StageRecord> stages;
  PositivityCertificate certificate;
};

/// Runs stages r = 1 .. q~-1 and certifies q_min_sum > floor at every point.
/// Throws CertificateFailed listing the offending ids when a point fails,
/// unless opts.throw_on_failure is false.
Result synthesize_single(const FormField& field, const std::string& form, int q_tilde, const Options& opts = {});

}  // namespace qpos::single
