#include "robgxe/cli.hpp"

int main(int argc, char** argv)
{
    return robgxe::run_cli(argc, argv);
}
