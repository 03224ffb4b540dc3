#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qpos/form_field.hpp"
#include "qpos/types.hpp"

// A metric making the traces of two Hermitian forms positive, from the level
// curve xi = level of xi(x) = -log det(<.,.> - x1 Q1 - x2 Q2).
namespace qpos::two_forms {

struct PairState {
  HermitianMatrix q1, q2;
  MetricMatrix base;  // <.,.>; identity by default
  std::optional<CVector> witness;

  PairState(HermitianMatrix a, HermitianMatrix b);
  PairState(HermitianMatrix a, HermitianMatrix b, MetricMatrix g);
  int dim() const { return q1.dim(); }
};

/// max over unit v of min(Q1(v,v), Q2(v,v)) equals
/// min over s in [0,1] of lambda_max(s Q1 + (1-s) Q2) (convexity of the joint
/// numerical range). Evaluated by golden-section search in s.
double common_direction_bound(const PairState& pair);

/// Multi-start ascent on min(Q1(v,v), Q2(v,v)) over the base unit sphere.
/// Starts: top eigenvectors of s Q1 + (1-s) Q2 on a grid of s, plus `trials`
/// random vectors. Returns a witness with both values > 0, or nothing.
std::optional<CVector> find_common_direction(const PairState& pair, int trials = 16, unsigned seed = 0);

struct XiEvaluation {
  std::array<double, 2> x{};
  bool in_O = false;
  double xi = 0.0;
  std::array<double, 2> grad{};
  std::array<std::array<double, 2>, 2> hessian{};
};

/// Deformed Gram matrix G - x1 Q1 - x2 Q2 in the original coordinates.
CMatrix deformed_metric(const PairState& pair, const std::array<double, 2>& x);

/// xi, gradient Tr(g^{-1} Q_r) and Hessian Re Tr(g^{-1} Q_s g^{-1} Q_r), with
/// determinants taken relative to the base metric so that xi(0) = 0.
XiEvaluation xi_eval(const PairState& pair, const std::array<double, 2>& x);

struct LevelCurveSample {
  double theta = 0.0;
  double t = 0.0;
  std::array<double, 2> x{};
  std::array<double, 2> grad{};
  double xi = 0.0;
  bool in_gamma_tilde = false;
};

struct TraceOptions {
  int n_angles = 512;
  double level = 1.0;
  double grad_floor = 1e-12;
  double tau_level = 1e-10;
  bool refine_endpoints = true;
  unsigned threads = 1;
};

/// Point where the ray at angle theta meets xi = level. Bracket [0, t_hi] with
/// t_hi doubled up to 20 times, then bisection to full precision.
LevelCurveSample shoot_ray(const PairState& pair, double theta, const TraceOptions& opts = {});

struct LevelCurve {
  std::vector<LevelCurveSample> samples;  // theta_k = (k + 1/2) pi / (2 n_angles)
  int first = -1, last = -1;              // range of Gamma~ members
  bool contiguous = true;
  // Ends of Gamma~ located by bisection in theta between the outermost member
  // and its non-member neighbor (or the axis ray when that is a member).
  std::optional<LevelCurveSample> start, end;
};

/// Throws NoCommonDirection when no witness is found or given.
LevelCurve trace_level_curve(const PairState& pair, const TraceOptions& opts = {});

struct PairOptions {
  TraceOptions trace;
  bool detect_proportional = true;
  double tau_prop = 1e-10;
  double near_prop_warn = 1e-6;
  int common_trials = 16;
  unsigned seed = 0;
};

struct PairMetric {
  std::array<double, 2> gamma{};
  MetricMatrix metric;
  std::array<double, 2> traces{};  // Tr_gamma Q1, Tr_gamma Q2
  bool proportional = false;
  double mu = 0.0;                 // <Q1,Q2> / <Q2,Q2>
  double proportionality_defect = 0.0;  // ||Q1 - mu Q2|| / ||Q1||
  std::vector<std::string> warnings;
};

/// Relative distance from Q1 to the line through Q2 (base Frobenius norm).
double proportionality_defect(const PairState& pair, double* mu = nullptr);

PairMetric pair_metric(const PairState& pair, const PairOptions& opts = {});

struct FieldResult {
  std::vector<PairMetric> points;
  std::vector<MetricMatrix> metrics;
  PositivityCertificate certificate;  // both traces (q = d) per point
  double max_adjacent_jump = 0.0;     // max ||gamma(p) - gamma(p')|| over edges
};

FieldResult field_metric_top_degree(const FormField& field, const std::string& q1, const std::string& q2,
                                    const PairOptions& opts = {}, bool smooth = false, bool throw_on_failure = true);

}  // namespace qpos::two_forms
