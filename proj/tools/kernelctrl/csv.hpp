#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <kernelctrl/embedding.hpp>

namespace kernelctrl::cli {

/// Shortest decimal text that reads back to the same double (17 significant
/// digits); NaN is written as an empty field.
std::string format_number(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(const std::string& v);
  CsvWriter& empty();
  void end_row();

 private:
  void separator();

  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t current_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Header `x0..x{n-1},u0..u{m-1},y0..y{n-1}`, one transition per row.
void write_sample(const std::string& path, const TransitionSample& sample);
TransitionSample read_sample(const std::string& path);

}  // namespace kernelctrl::cli
