#pragma once

namespace sivspec {
inline constexpr const char* kVersion = "0.1.0";
}
