#pragma once

namespace margin_phase {

// Schema tag embedded in all structured output.
inline constexpr const char* kSchema = "margin-phase/1";

// Git-describe style version string, bumped on release.
inline constexpr const char* kVersion = "v0.1.0";

}  // namespace margin_phase
