#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gatelab::io {

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// reader never observes a truncated file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// Splits one CSV line on commas. No quoting: none of the library's CSV
/// schemas carry strings containing commas.
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws std::out_of_range when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace gatelab::io
