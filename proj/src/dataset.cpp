#include "rpost/model.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace rpost {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, bool header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t column = 1;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                               : comma - start));
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << "line " << line_no << ", column " << column << ": cannot parse '" << cell
            << "' as a finite number";
        throw ParseError(msg.str(), line_no, column);
      }
      row.push_back(value);
      if (comma == std::string::npos) break;
      start = comma + 1;
      ++column;
    }
    if (width == 0) {
      width = row.size();
      if (width < 2)
        throw ParseError("line " + std::to_string(line_no) +
                             ": need a response and at least one covariate",
                         line_no, row.size());
    } else if (row.size() != width) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << width << " columns, found " << row.size();
      throw ParseError(msg.str(), line_no, std::min(row.size(), width) + 1);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no, 0);
  Dataset data;
  const Index n = static_cast<Index>(rows.size());
  data.responses.resize(n);
  data.design.resize(n, static_cast<Index>(width - 1));
  for (Index i = 0; i < n; ++i) {
    data.responses(i) = rows[i][0];
    for (std::size_t j = 1; j < width; ++j) data.design(i, j - 1) = rows[i][j];
  }
  return data;
}

Dataset load_dataset_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_dataset_csv(in, header);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  out << "x";
  for (Index j = 0; j < data.covariates(); ++j) out << ",z" << (j + 1);
  out << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out << data.responses(i);
    for (Index j = 0; j < data.covariates(); ++j) out << ',' << data.design(i, j);
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace rpost
