#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pipeobs/energy.hpp"

namespace pipeobs {

/// Column order of series.csv.
inline const std::vector<std::string> kSeriesColumns = {
    "t", "l2_err_sq", "h_rel", "f_aux", "lyapunov", "delta_m", "max_v", "dt"};

std::string series_csv(const DiagnosticsSeries& series);
void write_series_csv(const std::string& path, const DiagnosticsSeries& series);
/// Throws Error on a header or field mismatch.
DiagnosticsSeries parse_series_csv(const std::string& text);
DiagnosticsSeries read_series_csv(const std::string& path);

/// Sorted keys, no whitespace, numbers printed with 17 significant digits.
std::string canonical_dump(const nlohmann::json& value);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

/// Log-scale line chart of err over t.
std::string decay_svg(const std::vector<double>& t, const std::vector<double>& err,
                      const std::string& title);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace pipeobs
