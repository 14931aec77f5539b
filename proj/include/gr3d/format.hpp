#pragma once

#include <cstdio>
#include <string>

namespace gr3d {

/// Fixed-decimal formatting for metric values in exported text. Values that
/// round to zero lose their sign so "-0.00" never appears in artifacts.
inline std::string fixed_str(double value, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
    return s;
}

/// Shortest round-trip-exact representation, for alignment parameters that
/// downstream stages must invert bit-exactly.
inline std::string exact_str(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

} // namespace gr3d
