#pragma once

namespace rssmlp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rssmlp
