#include <string>
#include <vector>

#include "fgfpca/cli.hpp"

int main(int argc, char** argv)
{
    return fgfpca::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
