#include <iostream>
#include <string>
#include <vector>

#include "phishaudit/cli.hpp"

int main(int argc, char** argv) {
  return phishaudit::cli_main(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                              std::cerr);
}
