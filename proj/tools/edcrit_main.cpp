#include <iostream>

#include "edcrit/cli.hpp"

int main(int argc, char** argv) {
  return edcrit::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
