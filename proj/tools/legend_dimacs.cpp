// legend-dimacs: the built-in CDCL solver as a stand-alone DIMACS solver.
// Reads a CNF from the file argument or stdin, prints "s ..." and "v ..." lines
// and exits 10 (SAT) or 20 (UNSAT).

#include <fstream>
#include <iostream>

#include "legend/dimacs.hpp"

int main(int argc, char** argv) {
  using namespace legend::sat;
  std::ifstream file;
  if (argc > 1) {
    file.open(argv[1]);
    if (!file) {
      std::cerr << "legend-dimacs: cannot open " << argv[1] << '\n';
      return 1;
    }
  }
  DimacsProblem p;
  try {
    p = read_dimacs(argc > 1 ? static_cast<std::istream&>(file) : std::cin);
  } catch (const std::exception& e) {
    std::cerr << "legend-dimacs: " << e.what() << '\n';
    return 1;
  }
  Solver s;
  for (std::size_t i = 0; i < p.num_vars; ++i) s.new_var();
  for (const auto& c : p.clauses) s.add_clause(c);
  if (s.solve() == Result::Unsat) {
    std::cout << "s UNSATISFIABLE\n";
    return 20;
  }
  std::cout << "s SATISFIABLE\nv";
  for (std::size_t v = 0; v < p.num_vars; ++v) {
    const auto var = static_cast<Var>(v);
    std::cout << ' ' << (s.model_true(pos(var)) ? "" : "-") << v + 1;
  }
  std::cout << " 0\n";
  return 10;
}
