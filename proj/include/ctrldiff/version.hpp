#pragma once

namespace ctrldiff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ctrldiff
