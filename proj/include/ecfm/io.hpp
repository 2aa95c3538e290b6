#pragma once

#include "ecfm/linalg.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ecfm {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;
};

/// RFC-4180 output with a header row; fields needing it are quoted.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string to_csv(const CsvTable& table);

/// Numeric CSV with one header row. Throws SolverError(ConfigError) on
/// malformed input.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ecfm
