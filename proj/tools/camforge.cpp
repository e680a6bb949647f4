// SPDX-License-Identifier: Apache-2.0
#include "camforge/config.hpp"

int main(int argc, char** argv) { return camforge::run_cli(argc, argv); }
