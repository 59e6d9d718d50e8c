#include <batchdmc/cli.hpp>

int main(int argc, char** argv)
{
    return batchdmc::cli::run(argc, argv);
}
