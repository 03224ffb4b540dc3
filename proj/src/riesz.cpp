#include "qpos/riesz.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/parallel.hpp"

namespace qpos::riesz {
namespace {

RVector spectrum(const HermitianMatrix& t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(t.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

void require_admissible(const RVector& ev, const Disc& disc, double tau_sep_rel) {
  const double sep = separation(ev, disc);
  if (!(sep >= tau_sep_rel * disc.radius)) {
    std::ostringstream os;
    os << "eigenvalue within " << sep << " of the contour (threshold " << tau_sep_rel * disc.radius << ")";
    throw Error(ErrorKind::EigenvalueOnContour, os.str());
  }
}

}  // namespace

Disc::Disc(cplx c, double r) : center(c), radius(r) {
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "disc radius must be positive");
}

CMatrix resolvent(const HermitianMatrix& t, cplx zeta, double tau_sep) {
  const RVector ev = spectrum(t);
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) dist = std::min(dist, std::abs(zeta - ev(i)));
  if (!(dist > tau_sep)) {
    std::ostringstream os;
    os << "zeta = " << zeta << " is " << dist << " from the spectrum";
    throw Error(ErrorKind::NearSingularResolvent, os.str());
  }
  const int d = t.dim();
  const CMatrix a = zeta * CMatrix::Identity(d, d) - t.matrix();
  return a.partialPivLu().inverse();
}

double separation(const RVector& eigenvalues, const Disc& disc) {
  double sep = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    sep = std::min(sep, std::abs(std::abs(cplx(eigenvalues(i)) - disc.center) - disc.radius));
  }
  return sep;
}

ProjectorResult riesz_projector(const HermitianMatrix& t, const Disc& disc, int nodes,
                                const Options& opts) {
  if (nodes < 8) throw Error(ErrorKind::InvalidArgument, "at least 8 quadrature nodes are required");
  const RVector ev = spectrum(t);
  require_admissible(ev, disc, opts.tau_sep_rel);

  const int d = t.dim();
  const CMatrix id = CMatrix::Identity(d, d);
  std::vector<CMatrix> terms(static_cast<std::size_t>(nodes));
  parallel_for(terms.size(), opts.threads, [&](std::size_t k) {
    const double theta = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) / nodes;
    const cplx arm = disc.radius * std::polar(1.0, theta);
    const CMatrix a = (disc.center + arm) * id - t.matrix();
    // dzeta = i * arm * dtheta, so (1/2 pi i) dzeta = arm dtheta / (2 pi).
    terms[k] = arm * a.partialPivLu().inverse();
  });
  CMatrix p = CMatrix::Zero(d, d);
  for (const auto& term : terms) p += term;
  p /= static_cast<double>(nodes);

  ProjectorResult out;
  out.matrix = std::move(p);
  out.quad_nodes = nodes;
  out.separation = separation(ev, disc);
  out.idempotency_defect = op_norm(out.matrix * out.matrix - out.matrix);
  out.hermiticity_defect = op_norm(out.matrix - out.matrix.adjoint());
  return out;
}

CMatrix oracle_projector(const HermitianMatrix& t, const Disc& disc, double tau_sep_rel) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(t.matrix());
  require_admissible(es.eigenvalues(), disc, tau_sep_rel);
  const int d = t.dim();
  CMatrix p = CMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    if (std::abs(cplx(es.eigenvalues()(j)) - disc.center) < disc.radius) {
      const CVector v = es.eigenvectors().col(j);
      p += v * v.adjoint();
    }
  }
  return 0.5 * (p + p.adjoint());
}

double predicted_error(const RVector& eigenvalues, const Disc& disc, int nodes) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double dist = std::abs(cplx(eigenvalues(i)) - disc.center);
    const double rho = dist < disc.radius ? dist / disc.radius : disc.radius / dist;
    const double rn = std::pow(rho, nodes);
    worst = std::max(worst, rn / (1.0 + rn));
  }
  return worst;
}

int recommended_nodes(const RVector& eigenvalues, const Disc& disc, double target, int max_nodes) {
  int n = 64;
  while (n < max_nodes && predicted_error(eigenvalues, disc, n) > target) n *= 2;
  if (n > 64) {
    // Refine down in steps of 8 within the last doubling.
    int lo = n / 2, hi = n;
    while (hi - lo > 8) {
      const int mid = ((lo + hi) / 2 + 7) / 8 * 8;
      if (mid >= hi) break;
      if (predicted_error(eigenvalues, disc, mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    n = hi;
  }
  return std::min(n, max_nodes);
}

std::vector<ConvergencePoint> quadrature_convergence(const HermitianMatrix& t, const Disc& disc,
                                                     const std::vector<int>& node_list,
                                                     const Options& opts) {
  const CMatrix oracle = oracle_projector(t, disc, opts.tau_sep_rel);
  const RVector ev = spectrum(t);
  std::vector<ConvergencePoint> out;
  out.reserve(node_list.size());
  for (int n : node_list) {
    const auto res = riesz_projector(t, disc, n, opts);
    out.push_back({n, op_norm(res.matrix - oracle), predicted_error(ev, disc, n)});
  }
  return out;
}

std::string convergence_csv(const std::vector<ConvergencePoint>& points) {
  std::ostringstream os;
  os << "nodes,error,predicted\n" << std::setprecision(17);
  for (const auto& p : points) os << p.nodes << ',' << p.error << ',' << p.predicted << '\n';
  return os.str();
}

}  // namespace qpos::riesz
