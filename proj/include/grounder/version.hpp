// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace grounder {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace grounder
