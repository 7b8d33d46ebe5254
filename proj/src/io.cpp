#include "facsens/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "facsens/errors.hpp"

namespace facsens {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

}  // namespace

void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& header) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) {
    throw DimensionMismatch("write_csv: " + std::to_string(header.size()) +
                            " header names for " +
                            std::to_string(values.cols()) + " columns");
  }
  std::ofstream out(path);
  if (!out) throw IoError("write_csv: cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out << ',';
    out << header[c];
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", values(r, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write_csv: write to '" + path + "' failed");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("read_csv: '" + path + "' is empty (header row required)");
  }
  for (const std::string& name : split_line(line)) {
    table.header.push_back(strip(name));
  }
  const std::size_t cols = table.header.size();
  if (cols == 0) throw IoError("read_csv: '" + path + "' has an empty header");

  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;  // tolerate a trailing blank line
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != cols) {
      throw IoError("read_csv: '" + path + "' row " +
                    std::to_string(rows + 2) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(cols));
    }
    for (const std::string& f : fields) {
      const std::string token = strip(f);
      const char* begin = token.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || end != begin + token.size()) {
        throw IoError("read_csv: '" + path + "' row " +
                      std::to_string(rows + 2) + ": cannot parse '" + token +
                      "' as a number");
      }
      data.push_back(v);
    }
    ++rows;
  }
  table.values.resize(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      table.values(r, c) = data[r * cols + c];
    }
  }
  return table;
}

std::vector<std::string> numbered_header(const std::string& stem, int count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (int i = 1; i <= count; ++i) names.push_back(stem + std::to_string(i));
  return names;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace facsens
