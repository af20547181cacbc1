#include <string>
#include <vector>

#include "aloocv/cli.hpp"

int main(int argc, char** argv) {
  return aloocv::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
