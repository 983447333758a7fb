#include <qfluct/cli.hpp>

int main(int argc, char** argv) { return qfluct::cli::main_entry(argc, argv, std::cin, std::cout, std::cerr); }
