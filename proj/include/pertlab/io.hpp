#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pertlab::io {

/// Shortest decimal form that round-trips.
std::string format_double(double x);

std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);

/// CSV with `# key: value` metadata lines ahead of the header row. Fields
/// never contain commas or quotes in this project, so no quoting is done.
struct CsvDocument {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const;
  static CsvDocument parse(std::string_view text, const std::string& source = "<csv>");
  /// Empty string when the key is absent.
  std::string meta_value(std::string_view key) const;
  /// Column index; throws ParseError when missing.
  std::size_t column(std::string_view name) const;
};

/// Splits "a,b,c" (no quoting).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace pertlab::io
