#include "procwass_cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include "procwass/error.hpp"

namespace procwass::cli {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_number(std::string_view field, double& value) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

PointTable parse_points_csv(const std::string& text, const std::string& source_name,
                            std::optional<int> weights_col) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  bool header = false;
  std::istringstream in(text);
  std::string raw;
  long line_no = 0;
  bool first_content = true;
  auto fail = [&](const std::string& why) {
    throw Error(Errc::Parse, source_name + ":" + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto fields = split(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (!parse_number(fields[k], values[k])) {
        numeric = false;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      width = fields.size();
      if (!numeric) {
        header = true;
        continue;
      }
    }
    if (!numeric) fail("non-numeric field");
    if (fields.size() != width) {
      fail("expected " + std::to_string(width) + " columns, found " + std::to_string(fields.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) fail("non-finite value");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    line_no = std::max(line_no, 1L);
    fail("no data rows");
  }

  int wcol = -1;
  if (weights_col) {
    wcol = *weights_col;
    if (wcol < 0 || std::size_t(wcol) >= width) {
      throw Error(Errc::Parse, source_name + ": weights column " + std::to_string(wcol) + " out of range");
    }
    if (width < 2) throw Error(Errc::Parse, source_name + ": no coordinate columns besides weights");
  }

  PointTable table;
  table.had_header = header;
  const Eigen::Index n = Eigen::Index(rows.size());
  const Eigen::Index d = Eigen::Index(width) - (wcol >= 0 ? 1 : 0);
  table.points.resize(n, d);
  if (wcol >= 0) table.weights = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < width; ++k) {
      if (int(k) == wcol) {
        (*table.weights)(i) = rows[i][k];
      } else {
        table.points(i, c++) = rows[i][k];
      }
    }
  }
  return table;
}

PointTable read_points_csv(const std::string& path, std::optional<int> weights_col) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::Parse, path + ": cannot open file");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_points_csv(buf.str(), path, weights_col);
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& rows, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Parse, path + ": cannot open for writing");
  if (!header.empty()) out << header << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out << ',';
      out << format_double(rows(i, j));
    }
    out << '\n';
  }
}

}  // namespace procwass::cli
