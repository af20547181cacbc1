#pragma once

namespace aloocv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace aloocv
