#pragma once

namespace gpf {

inline constexpr const char* kToolName = "gpforecast";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace gpf
