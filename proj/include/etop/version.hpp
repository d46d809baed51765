#pragma once

namespace etop {

inline constexpr const char* version = "0.1.0";

} // namespace etop
