#pragma once

namespace offsetcal {

inline constexpr const char* kVersion = "0.1.0";

} // namespace offsetcal
