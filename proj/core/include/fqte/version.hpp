#pragma once

namespace fqte {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fqte
