#pragma once

namespace egml {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace egml
