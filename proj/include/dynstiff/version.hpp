#pragma once

namespace dynstiff {

inline constexpr const char* version = "0.1.0";

}
