#pragma once

namespace bitemp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bitemp
