#pragma once

namespace sbreak {

inline constexpr const char* kVersion = "sbreak 0.1.0";

}
