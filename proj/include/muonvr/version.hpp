// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace muonvr {

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace muonvr
