#pragma once

namespace confidssl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace confidssl
