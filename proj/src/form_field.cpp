#include "qpos/form_field.hpp"

#include <algorithm>
#include <limits>

#include "qpos/error.hpp"
#include "qpos/hermitian_core.hpp"

namespace qpos {

FormField::FormField(int dim, std::vector<SamplePoint> points) : dim_(dim), points_(std::move(points)) {
  if (dim_ < 1) throw Error(ErrorKind::InvalidArgument, "field dimension must be positive");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!index_.emplace(p.id, i).second) throw Error(ErrorKind::InvalidArgument, "duplicate point id", p.id);
    for (const auto& [name, h] : p.forms) {
      if (h.dim() != dim_) throw Error(ErrorKind::DimensionMismatch, "form '" + name + "' has wrong dimension", p.id);
    }
    if (p.g0 && p.g0->dim() != dim_) throw Error(ErrorKind::DimensionMismatch, "g0 has wrong dimension", p.id);
    if (p.in_F && !p.g0) throw Error(ErrorKind::InvalidArgument, "point in F without g0", p.id);
    if (p.subspace && p.subspace->ambient_dim() != dim_) {
      throw Error(ErrorKind::DimensionMismatch, "subspace has wrong ambient dimension", p.id);
    }
  }
  adjacency_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (const auto& nid : points_[i].neighbors) {
      auto it = index_.find(nid);
      if (it == index_.end()) throw Error(ErrorKind::InvalidArgument, "unknown neighbor '" + nid + "'", points_[i].id);
      adjacency_[i].push_back(it->second);
    }
  }
}

const HermitianMatrix& FormField::form(std::size_t i, const std::string& name) const {
  const auto& forms = points_[i].forms;
  auto it = forms.find(name);
  if (it == forms.end()) throw Error(ErrorKind::InvalidArgument, "missing form '" + name + "'", points_[i].id);
  return it->second;
}

MetricMatrix FormField::base_metric(std::size_t i) const {
  return points_[i].g0 ? *points_[i].g0 : MetricMatrix::identity(dim_);
}

std::optional<std::size_t> FormField::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool FormField::has_adjacency() const {
  return std::any_of(adjacency_.begin(), adjacency_.end(), [](const auto& a) { return !a.empty(); });
}

bool PositivityCertificate::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass(); });
}

std::vector<std::string> PositivityCertificate::failing_points() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.pass() && (out.empty() || out.back() != e.point_id)) out.push_back(e.point_id);
  }
  return out;
}

double PositivityCertificate::worst_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) m = std::min(m, e.margin());
  return m;
}

double default_floor(const HermitianMatrix& h) { return 1e-9 * std::max(1.0, h.norm()); }

CertificateEntry certify(const std::string& id, const std::string& form, const HermitianMatrix& h,
                         const MetricMatrix& g, int q, const std::string& tag) {
  return CertificateEntry{id, form, q, core::q_min_sum(h, g, q), default_floor(h), tag};
}

}  // namespace qpos
