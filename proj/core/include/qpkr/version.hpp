#pragma once

namespace qpkr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qpkr
