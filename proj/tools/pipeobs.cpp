#include <string>
#include <vector>

#include "pipeobs/cli.hpp"

int main(int argc, char** argv) {
    return pipeobs::run_cli(std::vector<std::string>(argv, argv + argc));
}
