#include <vector>

#include "vtw/cli.hpp"

int main(int argc, char** argv) {
  return vtw::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
