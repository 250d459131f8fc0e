#include "oscos/cli.hpp"

int main(int argc, char** argv)
{
    return oscos::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
