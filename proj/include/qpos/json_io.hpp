#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "qpos/form_field.hpp"
#include "qpos/types.hpp"

namespace qpos::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Serializes with insertion-ordered keys, two-space indent and every double
/// printed as %.17g, so equal values always give equal bytes.
std::string dump(const Json& j);

Json read_file(const std::string& path);
void write_file(const std::string& path, const Json& j);

// {"dim": d, "re": [[...]], "im": [[...]]}
Json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const Json& j, const std::string& path);
HermitianMatrix hermitian_from_json(const Json& j, const std::string& path);
MetricMatrix metric_from_json(const Json& j, const std::string& path);

// Rectangular column sets: {"re": rows, "im": rows}.
Json columns_to_json(const CMatrix& m, const std::string& prefix);

Json spectrum_to_json(const SpectrumWrt& s);
Json inertia_to_json(const Inertia& in);

FormField field_from_json(const Json& j);
Json field_to_json(const FormField& f);

Json certificate_to_json(const PositivityCertificate& c);

/// {"qpos_schema": 1, "points": [{"id", "metric"}]}
Json metrics_to_json(const FormField& f, const std::vector<MetricMatrix>& metrics);

/// Reads a real vector; throws SchemaError naming `path` on malformed input.
std::vector<double> real_array(const Json& j, const std::string& path);

}  // namespace qpos::io
