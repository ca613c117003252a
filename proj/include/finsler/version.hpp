#pragma once

namespace finsler {
inline constexpr const char* kToolName = "finsler-lab";
inline constexpr const char* kToolVersion = "0.1.0";
}  // namespace finsler
