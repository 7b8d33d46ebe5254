#ifndef FACSENS_IO_HPP
#define FACSENS_IO_HPP

#include <string>
#include <vector>

#include "facsens/numlin.hpp"

namespace facsens {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

// Comma-separated numeric table with a mandatory header row and '.' as
// the decimal separator.  Values are written with 17 significant digits
// so doubles round-trip exactly.
void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& header);

CsvTable read_csv(const std::string& path);

// Convenience for generated column names like t1..tk or y1..yq.
std::vector<std::string> numbered_header(const std::string& stem, int count);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace facsens

#endif  // FACSENS_IO_HPP
