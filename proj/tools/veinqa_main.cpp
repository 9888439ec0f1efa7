#include <string>
#include <vector>

#include "veinqa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return veinqa::run_cli(args);
}
