#ifndef KCL_REPORT_HPP
#define KCL_REPORT_HPP

#include <string>

#include "kcl/harness.hpp"

namespace kcl {

/// Serialized report. Keys are emitted sorted and floats use shortest
/// round-trip formatting, so equal runs give byte-equal files. Timing is
/// deliberately not included.
std::string report_json(const RunReport& report);

/// Inverse of report_json. Throws FormatError on malformed or
/// wrong-schema input.
RunReport report_from_json(const std::string& text);

/// CSV with header "stage,task,accuracy"; stage and task count from 1.
std::string matrix_csv(const AccuracyMatrix& matrix);

std::string comparison_json(const ComparisonSummary& summary);

/// CSV with header "alpha,final_avg_acc", one row per sweep point.
std::string sweep_summary_csv(const std::vector<std::pair<double, double>>& rows);

/// Round-trip decimal formatting for one double (shortest form that
/// parses back exactly).
std::string format_double(double value);

const char* optimizer_name(OptimizerKind kind);
OptimizerKind optimizer_from_name(const std::string& name);
const char* uncertainty_name(UncertaintyMeasure measure);
UncertaintyMeasure uncertainty_from_name(const std::string& name);

}  // namespace kcl

#endif  // KCL_REPORT_HPP
