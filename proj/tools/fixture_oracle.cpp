// Build-time helper: writes the exhaustive assignment optimum of a square
// cost CSV, used as the reference value for the bundled Sinkhorn fixture.

#include <fstream>
#include <iostream>

#include "storm/error.hpp"
#include "storm/io.hpp"
#include "storm/ot.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: fixture_oracle COST_CSV OUT_FILE\n";
    return 2;
  }
  try {
    const double best = storm::brute_force_assignment(storm::io::read_matrix_csv(argv[1]));
    std::ofstream(argv[2]) << storm::io::format_double(best) << '\n';
  } catch (const storm::Error& e) {
    std::cerr << "fixture_oracle: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
