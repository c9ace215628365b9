#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace procwass::cli {

struct PointTable {
  Eigen::MatrixXd points;                  // one sample per row
  std::optional<Eigen::VectorXd> weights;  // present when a weights column was requested
  bool had_header = false;
};

/// Reads a numeric CSV (comma separated, optional header row). Throws
/// Error(Parse) with the offending line number on malformed input.
PointTable read_points_csv(const std::string& path, std::optional<int> weights_col = std::nullopt);

PointTable parse_points_csv(const std::string& text, const std::string& source_name,
                            std::optional<int> weights_col = std::nullopt);

/// Writes rows with 17 significant digits.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& rows,
                      const std::string& header = {});

std::string format_double(double value);

}  // namespace procwass::cli
