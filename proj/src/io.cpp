#include "storm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "storm/error.hpp"

namespace storm::io {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(ErrorCode::kParse, where + ": not a number: '" + t + "'");
  }
  return v;
}

}  // namespace

Eigen::MatrixXd parse_matrix_csv(std::istream& in, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(t);
    std::string cell;
    const std::string where = origin + ":" + std::to_string(lineno);
    while (std::getline(ss, cell, ',')) row.push_back(parse_number(cell, where));
    if (t.back() == ',') throw Error(ErrorCode::kParse, where + ": trailing comma");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::kParse, where + ": expected " + std::to_string(rows.front().size()) +
                                         " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kParse, origin + ": no data");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path.string());
  return parse_matrix_csv(in, path.string());
}

Eigen::VectorXd read_vector_csv(const fs::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw Error(ErrorCode::kParse, path.string() + ": expected a single row or column, got " +
                                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_grid_csv(std::ostream& out, const GridMap& g) { write_matrix_csv(out, g.weights()); }

GridMap read_grid_csv(const fs::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kShapeMismatch, path.string() + ": grid must be square, got " +
                                               std::to_string(m.rows()) + "x" +
                                               std::to_string(m.cols()));
  }
  return GridMap(Field(m));
}

std::string encode_pgm(const GridMap& g) {
  const int p = g.side();
  std::string out = "P5\n" + std::to_string(p) + " " + std::to_string(p) + "\n65535\n";
  const double mx = g.weights().maxCoeff();
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const double scaled = mx > 0.0 ? g(i, j) / mx * 65535.0 : 0.0;
      const auto v = static_cast<unsigned>(std::lround(std::clamp(scaled, 0.0, 65535.0)));
      out.push_back(static_cast<char>((v >> 8) & 0xff));
      out.push_back(static_cast<char>(v & 0xff));
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kParse, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kParse, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParse, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace storm::io
