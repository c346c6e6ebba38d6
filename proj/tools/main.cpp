#include <string>
#include <vector>

#include "sbreak/cli_app.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return sbreak::run_cli(args);
}
