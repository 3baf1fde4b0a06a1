#pragma once

namespace ibnc {

inline constexpr const char* version() { return "0.1.0"; }

}  // namespace ibnc
