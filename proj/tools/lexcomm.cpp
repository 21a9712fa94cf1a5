// SPDX-License-Identifier: Apache-2.0
#include "lexcomm/cli.hpp"

int main(int argc, char** argv) { return lexcomm::run_cli(argc, argv); }
