#include "causalslab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "causalslab/errors.hpp"
#include "causalslab/scenario.hpp"

namespace causalslab {

namespace {

std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

bool parse_number(const std::string& text, double& out) {
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return false;
  const char* begin = text.c_str() + first;
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0';
}

Matrix to_matrix(const std::vector<std::vector<std::string>>& rows, std::size_t skip, const std::string& path) {
  if (rows.size() <= skip) throw Error(ErrorCode::InvalidArgument, "'" + path + "' has no numeric rows");
  const std::size_t cols = rows[skip].size();
  Matrix m(static_cast<Eigen::Index>(rows.size() - skip), static_cast<Eigen::Index>(cols));
  for (std::size_t r = skip; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      std::ostringstream os;
      os << "'" << path << "' row " << r + 1 << " has " << rows[r].size() << " columns, expected " << cols;
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_number(rows[r][c], v)) {
        std::ostringstream os;
        os << "'" << path << "' row " << r + 1 << " column " << c + 1 << " is not a number";
        throw Error(ErrorCode::InvalidArgument, os.str());
      }
      m(static_cast<Eigen::Index>(r - skip), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

nlohmann::json row_major(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

nlohmann::json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

}  // namespace

std::string format_label(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "failed while writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move output into place at '" + path + "'");
  }
}

CovarianceMatrix read_covariance_csv(const std::string& path) {
  Matrix m = to_matrix(read_rows(path), 0, path);
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::InvalidArgument, "covariance file '" + path + "' is not square");
  }
  return CovarianceMatrix(std::move(m));
}

std::string covariance_to_csv(const CovarianceMatrix& s) {
  std::string out;
  for (int r = 0; r < s.dim(); ++r) {
    for (int c = 0; c < s.dim(); ++c) {
      if (c > 0) out += ',';
      out += format_double(s(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix read_data_csv(const std::string& path) {
  const auto rows = read_rows(path);
  std::size_t skip = 0;
  if (!rows.empty()) {
    double dummy = 0.0;
    bool numeric = true;
    for (const auto& cell : rows[0]) numeric = numeric && parse_number(cell, dummy);
    if (!numeric) skip = 1;
  }
  return to_matrix(rows, skip, path);
}

nlohmann::json diagnostics_to_json(const SamplerDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"likelihood_evaluations", d.likelihood_evaluations},
          {"accepted_moves", d.accepted_moves},
          {"rejected_moves", d.rejected_moves},
          {"stalled_walks", d.stalled_walks},
          {"non_pd_evaluations", d.non_pd_evaluations},
          {"degenerate_recoveries", d.degenerate_recoveries},
          {"boundary_clamps", d.boundary_clamps},
          {"final_step_scale", d.final_step_scale},
          {"clusters", d.clusters}};
}

nlohmann::json posterior_to_json(const WeightedPosterior& posterior, const ConfounderLayout& layout) {
  auto draws = nlohmann::json::array();
  for (const auto& d : posterior.draws) {
    nlohmann::json item;
    item["c"] = std::vector<double>(d.point.data(), d.point.data() + d.point.size());
    item["log_weight"] = finite_or_string(d.log_weight);
    if (d.theta) {
      item["B"] = row_major(d.theta->B);
      item["V"] = std::vector<double>(d.theta->V.data(), d.theta->V.data() + d.theta->V.size());
    }
    draws.push_back(std::move(item));
  }
  nlohmann::json doc;
  doc["draws"] = std::move(draws);
  doc["log_evidence"] = finite_or_string(posterior.log_evidence);
  doc["log_evidence_error"] = posterior.log_evidence_error;
  doc["information"] = posterior.information;
  doc["effective_sample_size"] = posterior.effective_sample_size();
  doc["free_pairs"] = format_pairs(layout);
  doc["diagnostics"] = diagnostics_to_json(posterior.diagnostics);
  return doc;
}

}  // namespace causalslab
