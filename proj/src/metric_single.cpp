#include "qpos/metric_single.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <limits>
#include <sstream>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"
#include "qpos/parallel.hpp"
#include "qpos/riesz.hpp"

namespace qpos::single {
namespace {

void check_q_tilde(int q_tilde, int d) {
  if (q_tilde < 1 || q_tilde > d) {
    throw Error(ErrorKind::QOutOfRange, "q~ = " + std::to_string(q_tilde) + " outside [1, " + std::to_string(d) + "]");
  }
}

std::string join(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? "," : "") + ids[i];
  if (ids.size() > 20) out += ",...";
  return out;
}

}  // namespace

Stratification stratify(const FormField& field, const std::string& form, int q_tilde) {
  const int d = field.dim();
  check_q_tilde(q_tilde, d);
  Stratification st;
  st.q_tilde = q_tilde;
  const std::size_t n = field.size();
  st.nu_minus.resize(n);
  st.anchored.assign(n, 0);
  st.inertia.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = field.form(i, form);
    const Inertia in = core::inertia(s);
    if (in.n_plus < d - q_tilde + 1) {
      std::ostringstream os;
      os << "inertia (" << in.n_plus << "," << in.n_minus << "," << in.n_zero << ") has fewer than "
         << d - q_tilde + 1 << " positive eigenvalues";
      throw Error(ErrorKind::HypothesisViolated, os.str(), field.point(i).id);
    }
    st.inertia[i] = in;
    st.nu_minus[i] = in.n_minus;
    if (field.point(i).in_F) {
      if (!core::strictly_q_positive(s, *field.point(i).g0, q_tilde, default_floor(s))) {
        throw Error(ErrorKind::HypothesisViolated, "form is not strictly q~-positive w.r.t. g0 on F", field.point(i).id);
      }
      st.anchored[i] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!field.point(i).in_F) continue;
    for (std::size_t j : field.neighbors(i)) {
      if (st.anchored[j]) continue;
      const auto& s = field.form(j, form);
      if (core::strictly_q_positive(s, field.base_metric(j), q_tilde, default_floor(s))) st.anchored[j] = 1;
    }
  }
  return st;
}

double phi(const RVector& ev, int r, int q_tilde, const std::string& point_id) {
  const double num = ev.head(q_tilde).sum();
  const double den = ev.segment(r, q_tilde - r).sum();
  if (!(den > 0.0) || !(ev(q_tilde - 1) > 0.0)) {
    std::ostringstream os;
    os << "sum of eigenvalues " << r + 1 << ".." << q_tilde << " is " << den;
    throw Error(ErrorKind::DenominatorNonpositive, os.str(), point_id);
  }
  return -num / den;
}

double choose_f(const RVector& ev, int r, int q_tilde, double theta, const std::string& point_id) {
  return std::max(0.0, (1.0 + theta) * phi(ev, r, q_tilde, point_id));
}

CMatrix negative_projector(const HermitianMatrix& s, const MetricMatrix& g, int r) {
  const int d = s.dim();
  if (r < 0 || r > d) throw Error(ErrorKind::QOutOfRange, "r outside [0, d]");
  if (r == 0) return CMatrix::Zero(d, d);
  const auto sp = core::spectrum_wrt(s, g);
  const double tau = core::default_zero_threshold(s);
  if (!(sp.eigenvalues(r - 1) < -tau) || (r < d && sp.eigenvalues(r) < -tau)) {
    throw Error(ErrorKind::NoSpectralGap, "no gap at 0 between eigenvalues " + std::to_string(r) + " and " +
                                              std::to_string(r + 1));
  }
  const CMatrix v = sp.eigenvectors.leftCols(r);
  return v * v.adjoint() * g.matrix();
}

CMatrix negative_projector_riesz(const HermitianMatrix& s, const MetricMatrix& g, int r, int* nodes_used) {
  const int d = s.dim();
  if (r < 0 || r > d) throw Error(ErrorKind::QOutOfRange, "r outside [0, d]");
  if (r == 0) return CMatrix::Zero(d, d);
  const Eigen::SelfAdjointEigenSolver<CMatrix> ge(g.matrix());
  const CMatrix w = ge.operatorInverseSqrt();
  const HermitianMatrix t = s.congruence(w);
  const Eigen::SelfAdjointEigenSolver<CMatrix> te(t.matrix(), Eigen::EigenvaluesOnly);
  const RVector& ev = te.eigenvalues();
  const double tau = core::default_zero_threshold(s);
  if (!(ev(r - 1) < -tau) || (r < d && ev(r) < -tau)) {
    throw Error(ErrorKind::NoSpectralGap, "no gap at 0 between eigenvalues " + std::to_string(r) + " and " +
                                              std::to_string(r + 1));
  }
  const double beta = 0.5 * ev(r - 1);
  const double alpha = ev(0) + beta;  // as far below lambda_1 as beta is above lambda_r
  const riesz::Disc disc(0.5 * (alpha + beta), 0.5 * (beta - alpha));
  const int nodes = riesz::recommended_nodes(ev, disc, 1e-13);
  if (nodes_used) *nodes_used = nodes;
  const CMatrix pi = riesz::riesz_projector(t, disc, nodes).matrix;
  // Eigenvectors of the pencil are w times those of t, so P = w pi w^{-1}.
  return w * pi * ge.operatorSqrt();
}

MetricMatrix update_metric(const MetricMatrix& g, const CMatrix& p, double f) {
  if (!(f >= 0.0)) throw Error(ErrorKind::InvalidArgument, "f must be nonnegative");
  const double defect = op_norm(p * p - p);
  if (defect > 1e-8) {
    throw Error(ErrorKind::NotProjector, "||P^2 - P|| = " + std::to_string(defect));
  }
  if (f == 0.0) return g;
  const CMatrix added = p.adjoint() * g.matrix() * p;
  return MetricMatrix(HermitianMatrix(g.matrix() + f * added, 1e-9));
}

Result synthesize_single(const FormField& field, const std::string& form, int q_tilde, const Options& opts) {
  Result res;
  res.strata = stratify(field, form, q_tilde);
  const std::size_t n = field.size();
  const auto& st = res.strata;

  res.metrics.reserve(n);
  for (std::size_t i = 0; i < n; ++i) res.metrics.push_back(field.base_metric(i));
  res.f_total.assign(n, 0.0);
  std::vector<int> stage_of(n, 0);

  for (int r = 1; r <= q_tilde - 1; ++r) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (st.in_U(i, r)) members.push_back(i);
    }
    StageRecord rec;
    rec.r = r;
    auto close_stage = [&] {
      std::vector<double> sums(n, std::numeric_limits<double>::infinity());
      parallel_for(n, opts.threads, [&](std::size_t i) {
        if (st.in_V(i, r)) sums[i] = core::q_min_sum(field.form(i, form), res.metrics[i], q_tilde);
      });
      rec.min_sum_on_V = *std::min_element(sums.begin(), sums.end());
      res.stages.push_back(rec);
    };
    if (members.empty()) {
      close_stage();
      continue;
    }
    std::vector<double> f(n, 0.0);
    std::vector<RVector> eigs(n);
    parallel_for(members.size(), opts.threads, [&](std::size_t k) {
      const std::size_t i = members[k];
      eigs[i] = core::eigenvalues_wrt(field.form(i, form), res.metrics[i]);
      f[i] = choose_f(eigs[i], r, q_tilde, opts.theta, field.point(i).id);
    });

    if (opts.smooth && field.has_adjacency()) {
      std::vector<double> fs = f;
      for (std::size_t i : members) {
        double sum = f[i];
        for (std::size_t j : field.neighbors(i)) sum += f[j];
        const double avg = sum / static_cast<double>(field.neighbors(i).size() + 1);
        fs[i] = std::max(f[i], avg);
      }
      f = std::move(fs);
    }

    std::vector<double> gap(members.size(), 0.0), rescale(members.size(), 0.0);
    parallel_for(members.size(), opts.threads, [&](std::size_t k) {
      const std::size_t i = members[k];
      const auto& s = field.form(i, form);
      const MetricMatrix& g = res.metrics[i];
      const CMatrix p = negative_projector(s, g, r);
      if (opts.riesz_check) gap[k] = op_norm(p - negative_projector_riesz(s, g, r));
      const MetricMatrix gr = update_metric(g, p, f[i]);
      RVector predicted = eigs[i];
      predicted.head(r) /= (1.0 + f[i]);
      const RVector actual = core::eigenvalues_wrt(s, gr);
      rescale[k] = (actual - predicted).cwiseAbs().maxCoeff() / std::max(1.0, s.norm());
      res.metrics[i] = gr;
    });
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t i = members[k];
      res.f_total[i] = (1.0 + res.f_total[i]) * (1.0 + f[i]) - 1.0;
      stage_of[i] = r;
      rec.max_f = std::max(rec.max_f, f[i]);
      rec.max_projector_gap = std::max(rec.max_projector_gap, gap[k]);
      rec.max_rescale_error = std::max(rec.max_rescale_error, rescale[k]);
    }
    rec.points_updated = members.size();
    close_stage();
  }

  res.certificate.entries.resize(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    std::string tag = st.anchored[i] ? "g0 (anchored)" : "g0";
    if (stage_of[i] > 0) tag = "g0 + stage " + std::to_string(stage_of[i]);
    res.certificate.entries[i] = certify(field.point(i).id, form, field.form(i, form), res.metrics[i], q_tilde, tag);
  });
  if (opts.throw_on_failure && !res.certificate.passed()) {
    const auto bad = res.certificate.failing_points();
    throw Error(ErrorKind::CertificateFailed, std::to_string(bad.size()) + " points fail: " + join(bad),
                bad.front());
  }
  return res;
}

}  // namespace qpos::single
