#include "procwass_cli/json_io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "procwass/error.hpp"

#ifndef PROCWASS_VERSION
#define PROCWASS_VERSION "0.0.0"
#endif

namespace procwass::cli {

GaussianSpec parse_gaussian_spec(const std::string& text, const std::string& source_name) {
  auto fail = [&](const std::string& why) { throw Error(Errc::Parse, source_name + ": " + why); };
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("expected a JSON object");
  if (!doc.contains("cov")) fail("missing \"cov\"");

  GaussianSpec spec;
  const json& cov = doc.at("cov");
  if (!cov.is_array() || cov.empty()) fail("\"cov\" must be a non-empty list of rows");
  for (const json& row : cov) {
    if (!row.is_array()) fail("\"cov\" rows must be lists");
    std::vector<double> values;
    for (const json& v : row) {
      if (!v.is_number()) fail("\"cov\" entries must be numbers");
      values.push_back(v.get<double>());
    }
    spec.cov.push_back(std::move(values));
  }
  const std::size_t d = spec.cov.size();
  for (const auto& row : spec.cov) {
    if (row.size() != d) fail("\"cov\" must be square");
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double a = spec.cov[i][j];
      const double b = spec.cov[j][i];
      if (!std::isfinite(a)) fail("\"cov\" has non-finite entries");
      if (std::abs(a - b) > 1e-9 * std::max({1.0, std::abs(a), std::abs(b)})) fail("\"cov\" is not symmetric");
    }
  }

  if (doc.contains("mean")) {
    const json& mean = doc.at("mean");
    if (!mean.is_array()) fail("\"mean\" must be a list");
    for (const json& v : mean) {
      if (!v.is_number()) fail("\"mean\" entries must be numbers");
      spec.mean.push_back(v.get<double>());
    }
    if (spec.mean.size() != d) {
      throw Error(Errc::DimensionMismatch, source_name + ": mean has length " + std::to_string(spec.mean.size()) +
                                               " but cov is " + std::to_string(d) + "x" + std::to_string(d));
    }
  } else {
    spec.mean.assign(d, 0.0);
  }
  return spec;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Parse, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

GaussianSpec read_gaussian_spec(const std::string& path) { return parse_gaussian_spec(read_file(path), path); }

GaussianDistribution<double> to_distribution(const GaussianSpec& spec, const std::string& source_name) {
  const auto d = Eigen::Index(spec.cov.size());
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) cov(i, j) = spec.cov[i][j];
  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(spec.mean.data(), Eigen::Index(spec.mean.size()));
  try {
    return GaussianDistribution<double>(mean, SymmetricMatrix<double>(cov));
  } catch (const Error& e) {
    throw Error(e.code(), source_name + ": " + e.what());
  }
}

void to_json(json& j, const InputDigest& d) { j = json{{"path", d.path}, {"sha256", d.sha256}}; }

void from_json(const json& j, InputDigest& d) {
  j.at("path").get_to(d.path);
  j.at("sha256").get_to(d.sha256);
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"command", m.command}, {"parameters", m.parameters}, {"seed", m.seed},
           {"inputs", m.inputs},   {"version", m.version}};
}

void from_json(const json& j, RunManifest& m) {
  j.at("command").get_to(m.command);
  m.parameters = j.at("parameters");
  j.at("seed").get_to(m.seed);
  j.at("inputs").get_to(m.inputs);
  j.at("version").get_to(m.version);
}

RunManifest make_manifest(const std::string& command, json parameters, std::uint64_t seed,
                          const std::vector<std::string>& input_paths) {
  RunManifest m;
  m.command = command;
  m.parameters = std::move(parameters);
  m.seed = seed;
  m.version = PROCWASS_VERSION;
  for (const auto& p : input_paths) m.inputs.push_back({p, sha256_file(p)});
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

std::string dump_canonical(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace procwass::cli
