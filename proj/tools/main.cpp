#include "synaudit/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return synaudit::cli::run(argc, argv, std::cout, std::cerr); }
