#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qpos/types.hpp"

namespace qpos {

struct SamplePoint {
  std::string id;
  std::vector<double> coords;
  std::vector<std::string> neighbors;
  bool in_F = false;
  std::map<std::string, HermitianMatrix> forms;
  std::optional<MetricMatrix> g0;
  // Fiber of a subbundle, orthonormal w.r.t. g0 (identity when g0 is absent).
  std::optional<Subspace> subspace;
};

/// Finite sample of a vector bundle with per-point forms, metrics and
/// subbundle fibers. All points share the fiber dimension.
class FormField {
 public:
  FormField() = default;
  FormField(int dim, std::vector<SamplePoint> points);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const SamplePoint& point(std::size_t i) const { return points_[i]; }
  const std::vector<SamplePoint>& points() const { return points_; }

  /// Form `name` at point i; throws InvalidArgument naming the point if absent.
  const HermitianMatrix& form(std::size_t i, const std::string& name) const;
  /// g0 at point i, identity when absent.
  MetricMatrix base_metric(std::size_t i) const;
  std::optional<std::size_t> index_of(const std::string& id) const;
  /// Neighbor indices of point i (unknown ids are rejected at construction).
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  bool has_adjacency() const;

 private:
  int dim_ = 0;
  std::vector<SamplePoint> points_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Per-point record of a q-smallest-eigenvalue sum against a floor.
struct CertificateEntry {
  std::string point_id;
  std::string form;
  int q = 0;
  double min_sum = 0.0;
  double floor = 0.0;
  std::string metric_tag;

  double margin() const { return min_sum - floor; }
  bool pass() const { return min_sum > floor; }
};

struct PositivityCertificate {
  std::vector<CertificateEntry> entries;

  bool passed() const;
  std::vector<std::string> failing_points() const;
  double worst_margin() const;
};

/// 1e-9 * max(1, ||H||), the default certificate floor.
double default_floor(const HermitianMatrix& h);

/// Adds an entry for q_min_sum(h, g, q) with the default floor.
CertificateEntry certify(const std::string& id, const std::string& form, const HermitianMatrix& h,
                         const MetricMatrix& g, int q, const std::string& tag);

}  // namespace qpos
