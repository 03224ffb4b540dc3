#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qpos/form_field.hpp"
#include "qpos/metric_single.hpp"
#include "qpos/types.hpp"

// Defining functions, Levi forms and the Z(q) metric pipeline for a handful of
// model domains in C^n and CP^n.
namespace qpos::geometry {

/// Second-order data of a real function of z in C^n:
///   grad(j) = df/dzbar_j,  hess(j, k) = d^2 f / dz_k dzbar_j,
/// so the complex Hessian as a form is H(u, u) = u* hess u.
struct Jet {
  double value = 0.0;
  CVector grad;
  CMatrix hess;

  int dim() const { return static_cast<int>(grad.size()); }
  HermitianMatrix hessian() const { return HermitianMatrix(hess, 1e-9); }
};

Jet constant_jet(int n, double c);
/// w* D w with w = z and D Hermitian.
Jet quadratic_jet(const CMatrix& d, const CVector& z);
/// Re(a . z) = Re(sum_j a_j z_j); pluriharmonic.
Jet real_linear_jet(const CVector& a, const CVector& z);
/// F(f) given F, F', F''.
Jet compose(const Jet& f, double F, double F1, double F2);

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(double s, const Jet& a);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet log(const Jet& a);

using RealFunction = std::function<double(const CVector&)>;

/// Complex Hessian by central differences on the 2n real coordinates, step
/// h * max(1, |z|).
HermitianMatrix complex_hessian_fd(const RealFunction& f, const CVector& z, double h = 1e-4);

// --- domains ---------------------------------------------------------------

enum class DomainType { Ball, Quadric, Mqn, Product, Custom };

/// A point in a chart. For domains in CP^n (and the CP^{q-1} factor of a
/// product) `chart` is the homogeneous index set to 1; it is -1 for C^n.
struct ChartPoint {
  int chart = -1;
  CVector z;
};

struct Domain {
  DomainType type = DomainType::Ball;
  int n = 2;
  int q = 1;               // split index for quadric, mqn and product
  std::vector<double> mu;  // quadric weights, n + 1 of them
  CVector center;          // ball
  double radius = 1.0;     // ball and the C^{n-q+1} factor of a product
  double level = 1.0;      // mqn: boundary phi = level
  CMatrix custom_a;        // custom: rho = z* A z + 2 Re(b* z) + c
  CVector custom_b;
  double custom_c = 0.0;
  double sample_radius = 2.0;  // custom: Newton starts drawn from this ball

  static Domain ball(int n, double radius = 1.0);
  /// {sum mu_j |w_j|^2 < 0} in CP^n. Requires mu_j != 0, some mu_j < 0,
  /// mu_j > 1 for j <= n - q + 1 and mu_j > -1 otherwise.
  static Domain quadric(int n, int q, std::vector<double> mu);
  /// {phi < level} in M_q^n.
  static Domain mqn(int n, int q, double level = 1.0);
  /// (ball of `radius` in C^{n-q+1}) x CP^{q-1}, q >= 2.
  static Domain product(int n, int q, double radius = 1.0);
  static Domain custom(CMatrix a, CVector b, double c, double sample_radius = 2.0);

  bool projective() const { return type == DomainType::Quadric || type == DomainType::Mqn; }
  std::string name() const;
};

Domain domain_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json domain_to_json(const Domain& d);

/// Homogeneous coordinates of a chart point (projective domains and the
/// CP^{q-1} factor of products); empty for affine domains.
CVector homogeneous(const Domain& d, const ChartPoint& p);
/// Chart point for homogeneous w in the given chart (w(chart) != 0).
ChartPoint to_chart(const Domain& d, const CVector& w, int chart);
/// Preferred chart: argmax |w_j| over the negative group (projective
/// domains) or over all of CP^{q-1} (products).
int preferred_chart(const Domain& d, const CVector& w);

/// Defining function: normalized sum mu |w|^2 / |w|^2 for the quadric,
/// phi - level for mqn, |z'|^2 - r^2 for products, |z - c|^2 - r^2 for balls.
Jet rho_jet(const Domain& d, const ChartPoint& p);
/// Exhaustion weight: -log(1 - |w|_+^2 / |w|_-^2) for quadric and mqn,
/// |z'|^2 (first n - q + 1 coordinates) for products, |z|^2 otherwise.
Jet exhaustion_jet(const Domain& d, const ChartPoint& p);

/// -log(1 - |w|_+^2 / |w|_-^2) for CP^n with |w|_+ over the first n - q + 1
/// homogeneous coordinates.
Jet mqn_phi_jet(int n, int q, const ChartPoint& p);

// --- boundary frames and Levi forms ---------------------------------------

struct BoundaryFrame {
  CVector d_rho;       // drho/dzbar, so drho(X) = d_rho* X
  CMatrix tangent;     // n x (n-1), orthonormal basis of ker drho
  CVector transverse;  // d_rho / |d_rho|
};

/// Householder QR of d_rho. Throws FrameInvalid when |d_rho| < 1e-6.
BoundaryFrame boundary_frame(const CVector& d_rho);

/// Restriction of the complex Hessian of rho to the tangent frame. Throws
/// FrameInvalid when the frame is not orthonormal or not in ker drho (1e-10).
HermitianMatrix levi_form(const HermitianMatrix& hess_rho, const BoundaryFrame& frame);

struct BoundarySample {
  std::string id;
  ChartPoint point;
  std::vector<double> embed;  // chart-independent coordinates for neighbor search
  double rho = 0.0;
  HermitianMatrix hess_rho;
  BoundaryFrame frame;
  HermitianMatrix levi;
};

enum class HessianMode { Analytic, FiniteDifference };

struct SampleOptions {
  int samples = 1000;
  std::uint64_t seed = 0;
  int knn = 8;
  int newton_max = 60;
  int attempts = 64;  // Newton restarts per sample
  HessianMode mode = HessianMode::Analytic;
  double fd_step = 1e-4;
  unsigned threads = 1;
};

struct BoundarySampling {
  std::vector<BoundarySample> samples;
  std::vector<std::vector<std::size_t>> adjacency;  // symmetric kNN graph
  std::vector<int> component;
  int n_components = 0;
  long restarts = 0;  // Newton runs that were discarded
};

/// Newton projection onto rho = level from start (in the start's chart).
/// Returns false when it does not converge or |drho| drops below 1e-6.
bool newton_project(const Domain& d, ChartPoint& p, double level = 0.0, int max_iter = 60);

/// Samples rho = 0, builds frames and Levi forms, then the kNN graph and its
/// connected components. Sample i uses its own RNG stream (seed, i).
BoundarySampling sample_boundary(const Domain& d, const SampleOptions& opts = {});

/// Re-evaluates rho, the Levi inertia and the weight in a second chart for up
/// to `count` samples. Returns the largest discrepancy of the chart-invariant
/// values and the number of inertia mismatches.
struct ChartOverlap {
  int checked = 0;
  double max_value_gap = 0.0;
  int inertia_mismatches = 0;
};
ChartOverlap chart_overlap_check(const Domain& d, const BoundarySampling& s, int count = 64);

// --- Z(q) -------------------------------------------------------------------

struct ZqSample {
  int n_plus = 0, n_minus = 0;
  int branch = 0;  // 1: n_plus >= n - q, 2: n_minus >= q + 1, 0: neither
};

struct ZqReport {
  int n = 0, q = 0;
  std::vector<ZqSample> samples;
  std::vector<int> component_branch;  // 0 when a component is mixed or failing
  std::vector<std::string> failing;   // sample ids
  bool passed() const { return failing.empty(); }
};

/// Classifies every sample and requires one branch per component. Throws
/// ZqViolated with the first offending id when throw_on_failure is set.
ZqReport zq_check(const BoundarySampling& s, int n, int q, bool throw_on_failure = true);

struct PipelineResult {
  ZqReport zq;
  std::vector<int> q_tilde;          // per sample
  std::vector<MetricMatrix> metrics; // on T^{1,0}(boundary), in the tangent frame
  std::vector<single::StageRecord> stages;
  PositivityCertificate certificate;
  bool passed() const { return zq.passed() && certificate.passed(); }
};

/// Per component: metric_single on S = L (q~ = q) or S = -L (q~ = n - q - 1),
/// with F empty and the kNN graph as adjacency.
PipelineResult zq_metric_pipeline(const BoundarySampling& s, int n, int q, const single::Options& opts = {});

/// FormField over the samples with form "L" (the Levi form) and kNN neighbors.
FormField levi_field(const BoundarySampling& s, int n);

// --- M_q^n -------------------------------------------------------------------

struct MqnReport {
  int n = 0, q = 0;
  int samples = 0, inertia_ok = 0;
  int s_samples = 0, s_ok = 0;     // samples on S = {|w|_+ = 0}
  double s_max_negative = 0.0;     // largest |lambda| among the q-1 smallest on S
  int fd_checked = 0;
  double fd_max_rel = 0.0;         // analytic vs finite-difference Hessian
  int overlap_checked = 0;
  double overlap_max_gap = 0.0;    // phi in two charts
  bool passed() const {
    return inertia_ok == samples && s_ok == s_samples && fd_max_rel <= 1e-6 && overlap_max_gap <= 1e-8;
  }
};

/// Hessian inertia of phi at random chart points of M_q^n off S, the q-1
/// vanishing eigenvalues on S, an FD cross-check and a chart-overlap check.
MqnReport mqn_inertia_check(int n, int q, int samples, std::uint64_t seed, unsigned threads = 1);

/// Samples interior points of a quadric domain and counts those with
/// sum mu |w|^2 < 0 but |w|_+^2 >= |w|_-^2 (should be none).
int quadric_inclusion_violations(const Domain& d, int samples, std::uint64_t seed);

}  // namespace qpos::geometry
