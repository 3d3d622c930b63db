#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace berknash::csv {

// 17 significant digits, '.' decimal separator; round-trips every double.
std::string number(double value);
std::string number(long long value);
inline std::string number(int value) { return number(static_cast<long long>(value)); }
inline std::string number(long value) { return number(static_cast<long long>(value)); }

// RFC-4180 quoting: fields containing ',', '"', CR or LF are quoted and
// embedded quotes doubled. Rows end with "\n".
void write_row(std::ostream& os, const std::vector<std::string>& fields);

// Inverse of write_row for a single line (no embedded newlines).
std::vector<std::string> parse_row(const std::string& line);

}  // namespace berknash::csv
