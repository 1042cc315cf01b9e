#include <iostream>
#include <string>
#include <vector>

#include "isp/cli.hpp"

int main(int argc, char** argv) {
    return isp::cli_main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
