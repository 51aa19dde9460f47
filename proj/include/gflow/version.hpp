#pragma once

namespace gflow {

inline constexpr const char* version_string = "gflow 0.1.0";

} // namespace gflow
