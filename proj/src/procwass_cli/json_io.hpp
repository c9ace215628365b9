#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "procwass/gaussian_metrics.hpp"

namespace procwass::cli {

using nlohmann::json;

inline constexpr const char* kSchema = "procwass/1";

struct GaussianSpec {
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;
};

/// Parses {"mean": [...], "cov": [[...], ...]}; "mean" may be omitted (zero).
/// Throws Error(Parse) for malformed or non-symmetric input and
/// Error(DimensionMismatch) when mean and cov disagree.
GaussianSpec parse_gaussian_spec(const std::string& text, const std::string& source_name);
GaussianSpec read_gaussian_spec(const std::string& path);
GaussianDistribution<double> to_distribution(const GaussianSpec& spec, const std::string& source_name);

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  json parameters = json::object();
  std::uint64_t seed = 0;
  std::vector<InputDigest> inputs;
  std::string version;
};

void to_json(json& j, const InputDigest& d);
void from_json(const json& j, InputDigest& d);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);

RunManifest make_manifest(const std::string& command, json parameters, std::uint64_t seed,
                          const std::vector<std::string>& input_paths);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);
std::string read_file(const std::string& path);

json vector_json(const Eigen::VectorXd& v);
json matrix_json(const Eigen::MatrixXd& m);  // list of rows

/// Canonical serialization: sorted keys, two-space indent, trailing newline.
std::string dump_canonical(const json& doc);

}  // namespace procwass::cli
