#pragma once

#include <string>
#include <string_view>

namespace outtree {

/// Shortest decimal that reads back to the same double ("inf", "-inf", "nan"
/// for non-finite values).
std::string format_double(double x);

/// Exact C99 hex-float representation (e.g. 0x1.8p+1).
std::string format_hex(double x);

/// Parses decimal or hex-float text, including inf/nan spellings.
/// Throws DataError unless the whole token is consumed.
double parse_double(std::string_view text);

}  // namespace outtree
