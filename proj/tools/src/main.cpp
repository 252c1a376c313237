// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "qvit/cli.hpp"

int main(int argc, char** argv) { return qvit::cli::run(argc, argv, std::cout, std::cerr); }
