#include <string>
#include <vector>

#include "mol/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mol::cli::run_cli(args);
}
