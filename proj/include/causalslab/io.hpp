#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "causalslab/nested_sampler.hpp"
#include "causalslab/sem_model.hpp"

namespace causalslab {

/// 17 significant digits (lossless); infinities and
/// NaN print as "inf", "-inf" and "nan".
std::string format_double(double x);
/// Shortest text that round-trips, for labels such as mass_0.9_1.1.
std::string format_label(double x);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

/// n rows of n comma-separated numbers, no header.
CovarianceMatrix read_covariance_csv(const std::string& path);
std::string covariance_to_csv(const CovarianceMatrix& s);

/// Raw observations, one row per sample. A leading non-numeric header row is
/// skipped.
Matrix read_data_csv(const std::string& path);

/// {draws: [{c, log_weight, B, V}], log_evidence, log_evidence_error,
///  information, effective_sample_size, free_pairs, diagnostics}.
/// B is listed row-major over the full n x n matrix, c in layout order.
nlohmann::json posterior_to_json(const WeightedPosterior& posterior, const ConfounderLayout& layout);
nlohmann::json diagnostics_to_json(const SamplerDiagnostics& d);

}  // namespace causalslab
