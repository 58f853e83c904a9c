#include <pdcd/cli.hpp>

int main(int argc, char** argv)
{
    return pdcd::cli::main_entry(std::vector<std::string>(argv, argv + argc));
}
