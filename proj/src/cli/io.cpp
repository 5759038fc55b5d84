#include "canon_lti/cli/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "canon_lti/cli/config.hpp"

namespace canon_lti::cli {

const char* tool_version() { return CANON_LTI_VERSION; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw SchemaError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table, const Provenance& prov) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# canon-lti " << prov.version << " config_hash=" << prov.config_hash
      << " seed=" << prov.seed << " command=" << prov.command << "\n";
  for (size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void write_json(const std::filesystem::path& path, nlohmann::json doc, const Provenance& prov) {
  ensure_parent(path);
  doc["provenance"] = {{"tool", "canon-lti"},
                       {"version", prov.version},
                       {"config_hash", prov.config_hash},
                       {"seed", prov.seed},
                       {"command", prov.command}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      t.header = split(line);
      have_header = true;
      continue;
    }
    auto row = split(line);
    if (row.size() != t.header.size())
      throw SchemaError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                        std::to_string(row.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw SchemaError(path.string() + ": no header line");
  return t;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<int> ucols, ycols, xcols;
  for (size_t i = 0; i < t.header.size(); ++i) {
    const std::string& h = t.header[i];
    if (h == "u" || h.rfind("u_", 0) == 0) ucols.push_back(static_cast<int>(i));
    else if (h == "y" || h.rfind("y_", 0) == 0) ycols.push_back(static_cast<int>(i));
    else if (h.rfind("x_", 0) == 0) xcols.push_back(static_cast<int>(i));
    else if (h != "t") throw SchemaError(path.string() + ": unexpected column '" + h + "'");
  }
  if (ucols.empty() || ycols.empty())
    throw SchemaError(path.string() + ": trajectory needs u and y columns");
  if (t.rows.empty()) throw SchemaError(path.string() + ": no data rows");
  const auto T = static_cast<Eigen::Index>(t.rows.size());
  MatrixXd u(T, static_cast<Eigen::Index>(ucols.size()));
  MatrixXd y(T, static_cast<Eigen::Index>(ycols.size()));
  for (Eigen::Index r = 0; r < T; ++r) {
    const auto& row = t.rows[static_cast<size_t>(r)];
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    for (size_t k = 0; k < ucols.size(); ++k)
      u(r, static_cast<Eigen::Index>(k)) = parse_double(row[static_cast<size_t>(ucols[k])], where);
    for (size_t k = 0; k < ycols.size(); ++k)
      y(r, static_cast<Eigen::Index>(k)) = parse_double(row[static_cast<size_t>(ycols[k])], where);
  }
  // States in the file are x_1..x_T; the initial state is not recorded.
  return Trajectory(std::move(u), std::move(y));
}

SampleFile read_samples_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto& h = t.header;
  if (h.size() < 5 || h[0] != "chain" || h[1] != "iter" || h[h.size() - 2] != "log_post" ||
      h.back() != "divergent")
    throw SchemaError(path.string() +
                      ": samples header must be chain,iter,<params>,log_post,divergent");
  SampleFile f;
  f.names.assign(h.begin() + 2, h.end() - 2);
  const auto d = static_cast<Eigen::Index>(f.names.size());
  std::map<int, std::vector<const std::vector<std::string>*>> by_chain;
  for (const auto& row : t.rows) {
    const double c = parse_double(row[0], path.string());
    if (c < 0 || c != std::floor(c)) throw SchemaError(path.string() + ": bad chain index");
    by_chain[static_cast<int>(c)].push_back(&row);
  }
  if (by_chain.empty()) throw SchemaError(path.string() + ": no draws");
  const size_t n = by_chain.begin()->second.size();
  for (const auto& [c, rows] : by_chain) {
    if (rows.size() != n) throw SchemaError(path.string() + ": chains differ in length");
    MatrixXd draws(static_cast<Eigen::Index>(n), d);
    VectorXd lp(static_cast<Eigen::Index>(n));
    std::vector<int> div(n);
    for (size_t i = 0; i < n; ++i) {
      const auto& row = *rows[i];
      const std::string where = path.string() + " chain " + std::to_string(c);
      for (Eigen::Index j = 0; j < d; ++j)
        draws(static_cast<Eigen::Index>(i), j) = parse_double(row[static_cast<size_t>(j + 2)], where);
      lp(static_cast<Eigen::Index>(i)) = parse_double(row[static_cast<size_t>(d + 2)], where);
      div[i] = static_cast<int>(parse_double(row.back(), where));
    }
    f.draws.push_back(std::move(draws));
    f.log_post.push_back(std::move(lp));
    f.divergent.push_back(std::move(div));
  }
  return f;
}

CsvTable samples_table(const PosteriorSamples& s) {
  CsvTable t;
  t.header = {"chain", "iter"};
  t.header.insert(t.header.end(), s.names.begin(), s.names.end());
  t.header.push_back("log_post");
  t.header.push_back("divergent");
  for (int c = 0; c < s.n_chains(); ++c)
    for (int i = 0; i < s.n_kept(); ++i) {
      std::vector<std::string> row{std::to_string(c), std::to_string(s.warmup_len + i)};
      for (int j = 0; j < s.dim(); ++j) row.push_back(format_double(s.draws[c](i, j)));
      row.push_back(format_double(s.log_post[c](i)));
      const auto& dv = s.divergent[static_cast<size_t>(c)];
      row.push_back(std::to_string(static_cast<size_t>(i) < dv.size() ? dv[i] : 0));
      t.rows.push_back(std::move(row));
    }
  return t;
}

nlohmann::json matrix_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json vector_json(const VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::json spectrum_json(const EigenSpectrum& s) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& z : s.values()) a.push_back({z.real(), z.imag()});
  return a;
}

}  // namespace canon_lti::cli
