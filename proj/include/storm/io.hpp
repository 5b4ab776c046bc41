#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "storm/grid.hpp"

namespace storm::io {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double v);

// Comma-separated numbers, one matrix row per line. Blank lines and lines
// starting with '#' are skipped. Throws kParse on bad numbers or ragged rows.
Eigen::MatrixXd parse_matrix_csv(std::istream& in, const std::string& origin);
Eigen::MatrixXd read_matrix_csv(const fs::path& path);

// A vector may be stored as one row or as one column.
Eigen::VectorXd read_vector_csv(const fs::path& path);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

// P rows of P values.
void write_grid_csv(std::ostream& out, const GridMap& g);
GridMap read_grid_csv(const fs::path& path);

// Binary P5, maxval 65535, big-endian samples scaled so the largest weight
// maps to 65535.
std::string encode_pgm(const GridMap& g);

// Writes through a sibling temporary and renames, so readers never see a
// half-written file.
void write_file(const fs::path& path, const std::string& contents);
std::string read_file(const fs::path& path);

}  // namespace storm::io
