#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neurospect::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 style: comma separated, optional double-quoted fields with ""
/// escapes, LF or CRLF line endings. A UTF-8 BOM is skipped.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

/// Shortest text that parses back to the identical double.
std::string format_double(double v);

}  // namespace neurospect::csv
