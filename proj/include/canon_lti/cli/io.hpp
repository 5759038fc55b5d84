#pragma once

// File formats of the command-line tool. Every file carries the tool version
// and the configuration hash: CSV files as a leading '#' comment line, JSON
// files under a "provenance" key.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "canon_lti/inference.hpp"
#include "canon_lti/lti_core.hpp"

namespace canon_lti::cli {

struct Provenance {
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string command;
};

const char* tool_version();

/// Shortest text that round-trips is not needed here; %.17g is exact and stable.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table, const Provenance& prov);
void write_json(const std::filesystem::path& path, nlohmann::json doc, const Provenance& prov);

/// Reads a CSV written by write_csv (or any CSV with '#' comment lines).
CsvTable read_csv(const std::filesystem::path& path);

/// Trajectory from columns t, u (or u_1..), y (or y_1..), optional x_1...
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Samples file: chain, iter, one column per parameter, log_post, divergent.
struct SampleFile {
  std::vector<std::string> names;
  std::vector<MatrixXd> draws;
  std::vector<VectorXd> log_post;
  std::vector<std::vector<int>> divergent;
};

SampleFile read_samples_csv(const std::filesystem::path& path);
CsvTable samples_table(const PosteriorSamples& samples);

nlohmann::json matrix_json(const MatrixXd& M);  // array of rows
nlohmann::json vector_json(const VectorXd& v);
nlohmann::json spectrum_json(const EigenSpectrum& s);  // [[re, im], ...]

}  // namespace canon_lti::cli
