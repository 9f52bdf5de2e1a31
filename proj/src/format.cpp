#include "outtree/format.hpp"

#include "outtree/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace outtree {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::string format_hex(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    int n = std::snprintf(buf.data(), buf.size(), "%a", x);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

double parse_double(std::string_view text) {
    // strtod understands hex floats and inf/nan; it needs a terminated buffer.
    std::string owned(text);
    while (!owned.empty() && (owned.back() == ' ' || owned.back() == '\r' || owned.back() == '\t'))
        owned.pop_back();
    std::size_t start = 0;
    while (start < owned.size() && (owned[start] == ' ' || owned[start] == '\t')) ++start;
    if (start == owned.size()) throw DataError("empty numeric field");
    const char* begin = owned.c_str() + start;
    char* end = nullptr;
    double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw DataError("not a number: '" + std::string(text) + "'");
    return value;
}

}  // namespace outtree
