// Copyright 2026 The fedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 ok, 2 configuration or usage error,
// 3 runtime failure, 4 report over an incomplete log.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitIncomplete = 4;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fedsim
