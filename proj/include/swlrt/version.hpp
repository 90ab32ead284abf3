#pragma once

namespace swlrt {

inline constexpr const char* version = "0.1.0";

}  // namespace swlrt
