#pragma once

#include <string>
#include <string_view>

namespace topmind {

/// RFC 4180 field quoting: quotes the field when it contains a comma, quote,
/// CR or LF.
std::string csv_field(std::string_view field);

/// Full-precision decimal rendering used by every machine-readable CSV
/// output ("%.17g").
std::string format_real(double value);

/// One-decimal percentage for human-readable tables, e.g. 0.2714 -> "27.1".
std::string format_percent(double fraction);

std::string to_lower_ascii(std::string_view text);
std::string trim(std::string_view text);

/// Current UTC time as ISO 8601 with seconds, e.g. 2026-01-31T12:00:00Z.
std::string utc_timestamp_now();

}  // namespace topmind
