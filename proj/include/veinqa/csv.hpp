#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace veinqa::csv {

/// One parsed row together with its 1-based line number in the source.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Minimal RFC 4180 reader: quoted fields may hold commas, doubled quotes
/// and newlines. A trailing CR before LF is tolerated. Blank lines are skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Shortest decimal text that round-trips to the same double; "nan" for NaN.
std::string format_real(double value);
double parse_real(std::string_view text);

}  // namespace veinqa::csv
