#include <string>
#include <vector>

#include "rehab/cli.hpp"

int main(int argc, char** argv) {
    return rehab::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
