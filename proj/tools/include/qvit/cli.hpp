// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace qvit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `qvit` tool. Returns the process exit code: 0 on
/// success, 1 for bad flags or invalid configuration, 2 for runtime
/// failures (I/O, parsing, divergence).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qvit::cli
