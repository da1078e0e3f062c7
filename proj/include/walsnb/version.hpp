#pragma once

namespace walsnb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace walsnb
