#include "kernelctrl/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <kernelctrl/errors.hpp>

namespace kernelctrl::cli {

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw Error("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::separator() {
  if (current_ == columns_)
    throw Error("csv '" + path_ + "': row has more than " + std::to_string(columns_) + " fields");
  if (current_++ > 0) out_ << ',';
}

CsvWriter& CsvWriter::field(double v) {
  separator();
  out_ << format_number(v);
  return *this;
}

CsvWriter& CsvWriter::field(long long v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(const std::string& v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::empty() {
  separator();
  return *this;
}

void CsvWriter::end_row() {
  if (current_ != columns_)
    throw Error("csv '" + path_ + "': row has " + std::to_string(current_) + " of " +
                std::to_string(columns_) + " fields");
  out_ << '\n';
  current_ = 0;
  if (!out_) throw Error("write to '" + path_ + "' failed");
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error("csv: no column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() ||
      (errno == ERANGE && std::isinf(v)))
    throw Error(path + ":" + std::to_string(line) + ": '" + text + "' is not a number");
  return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  table.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != table.header.size())
      throw Error(path + ":" + std::to_string(lineno) + ": expected " +
                  std::to_string(table.header.size()) + " fields, got " +
                  std::to_string(row.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_sample(const std::string& path, const TransitionSample& sample) {
  std::vector<std::string> header;
  for (Eigen::Index d = 0; d < sample.state_dim(); ++d) header.push_back("x" + std::to_string(d));
  for (Eigen::Index d = 0; d < sample.action_dim(); ++d) header.push_back("u" + std::to_string(d));
  for (Eigen::Index d = 0; d < sample.state_dim(); ++d) header.push_back("y" + std::to_string(d));
  CsvWriter out(path, header);
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (Eigen::Index d = 0; d < sample.state_dim(); ++d) out.field(sample.states(i, d));
    for (Eigen::Index d = 0; d < sample.action_dim(); ++d) out.field(sample.actions(i, d));
    for (Eigen::Index d = 0; d < sample.state_dim(); ++d) out.field(sample.successors(i, d));
    out.end_row();
  }
}

TransitionSample read_sample(const std::string& path) {
  const CsvTable table = read_csv(path);
  Eigen::Index counts[3] = {0, 0, 0};
  int phase = 0;
  for (const auto& h : table.header) {
    const int kind = h.empty() ? -1 : h[0] == 'x' ? 0 : h[0] == 'u' ? 1 : h[0] == 'y' ? 2 : -1;
    if (kind < phase || h.substr(1) != std::to_string(counts[kind]))
      throw Error(path + ":1: unexpected column '" + h + "'");
    phase = kind;
    ++counts[kind];
  }
  const Eigen::Index n = counts[0], m = counts[1], ny = counts[2];
  if (n == 0 || m == 0 || ny != n)
    throw Error(path + ":1: header must be x0..x{n-1},u0..u{m-1},y0..y{n-1}");
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  TransitionSample s{PointSet(rows, n), PointSet(rows, m), PointSet(rows, n)};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    const auto line = static_cast<std::size_t>(i) + 2;
    for (Eigen::Index d = 0; d < n; ++d) s.states(i, d) = parse_double(r[d], path, line);
    for (Eigen::Index d = 0; d < m; ++d) s.actions(i, d) = parse_double(r[n + d], path, line);
    for (Eigen::Index d = 0; d < n; ++d)
      s.successors(i, d) = parse_double(r[n + m + d], path, line);
  }
  s.validate();
  return s;
}

}  // namespace kernelctrl::cli
