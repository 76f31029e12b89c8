#pragma once

namespace fhproxy {

inline constexpr const char* kVersion = "0.1.0";

} // namespace fhproxy
