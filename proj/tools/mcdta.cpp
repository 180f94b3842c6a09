#include <string>
#include <vector>

#include "mcdta/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mcdta::run_cli(args);
}
