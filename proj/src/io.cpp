#include "ecfm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ecfm {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::string to_csv(const CsvTable& table) {
  if (table.rows.cols() != static_cast<Eigen::Index>(table.header.size())) {
    throw SolverError(ErrorKind::DimensionMismatch, "CSV header and row width differ");
  }
  std::string out;
  for (size_t j = 0; j < table.header.size(); ++j) {
    if (j) out += ',';
    out += quote_field(table.header[j]);
  }
  out += "\r\n";
  for (Eigen::Index i = 0; i < table.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.rows.cols(); ++j) {
      if (j) out += ',';
      out += format_double(table.rows(i, j));
    }
    out += "\r\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, to_csv(table)); }

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  if (!std::getline(in, line)) throw SolverError(ErrorKind::ConfigError, "empty CSV");
  table.header = split_record(line);
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_record(line);
    if (fields.size() != table.header.size()) {
      throw SolverError(ErrorKind::ConfigError, "CSV line " + std::to_string(lineno) + " has the wrong field count");
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw SolverError(ErrorKind::ConfigError, "CSV line " + std::to_string(lineno) + ": bad number '" + f + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  table.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      table.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverError(ErrorKind::ConfigError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolverError(ErrorKind::ConfigError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ecfm
