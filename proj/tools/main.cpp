#include "cli.hpp"

int main(int argc, char** argv) {
  return addfit::cli::run(argc, argv, std::cout, std::cerr);
}
