#include <iostream>
#include <string>
#include <vector>

#include <ising_lasso/cli.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ising_lasso::cli::dispatch(args, std::cout, std::cerr);
}
