#pragma once

namespace voiplace {

inline constexpr const char* kVersion = "0.1.0";

}
