// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return artikin::run_cli(argc, argv, std::cout, std::cerr);
}
