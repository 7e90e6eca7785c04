#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tmn {

/// Shortest-safe round-trip form: 17 significant digits.
std::string format_double(double value);
/// Whole-field parse; nullopt on trailing characters or non-finite results.
std::optional<double> parse_double(std::string_view text);
std::optional<std::size_t> parse_size(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char sep);
/// Splits on '\n', dropping a trailing '\r' from each line. A final newline
/// does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace tmn
