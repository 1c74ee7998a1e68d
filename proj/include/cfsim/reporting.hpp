#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfsim/harness.hpp"

namespace cfsim {

/// Similarity matrix dumps: CSV rows (photo_id, skull_id, similarity) or a
/// little-endian binary blob. Both round-trip exactly.
void save_matrix_csv(const ComparisonMatrix& matrix, const std::string& path);
ComparisonMatrix load_matrix_csv(const std::string& path);
void save_matrix_binary(const ComparisonMatrix& matrix, const std::string& path);
ComparisonMatrix load_matrix_binary(const std::string& path);

/// Machine-readable report (runtime stats excluded; those go to the manifest).
nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
void save_report_json(const ExperimentReport& report, const std::string& path);
ExperimentReport load_report_json(const std::string& path);

/// Human table mirroring the experiment summary layout:
/// Exp | #Land | #Sbj | #SFO | FSTT | #Vis | Dir | Noise | Averaged Rank | Acc (%).
std::string report_table(const std::vector<ExperimentReport>& reports);

/// CMC curves, one column per report: rank, fraction...
void save_cmc_csv(const std::vector<ExperimentReport>& reports, const std::string& path);

/// Grouped-bar SVG of accuracy by visible-landmark count, one bar group per
/// #Vis value (ascending), one bar per (direction, noise) condition.
std::string svg_accuracy_chart(const std::vector<ExperimentReport>& reports);

}  // namespace cfsim
