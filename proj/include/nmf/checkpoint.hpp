#pragma once

#include <filesystem>
#include <string>

#include "nmf/forecaster.hpp"

namespace nmf {

// JSON object mapping each parameter name to {"shape": [...], "data": [...]}.
// Doubles are written in shortest round-trip form, so loading is bitwise exact.
std::string checkpoint_to_string(const ForecasterParams& params);
void save_checkpoint(const std::filesystem::path& path, const ForecasterParams& params);

/// Builds the layout for (variant, config) and fills it from the document.
/// Any missing or extra parameter, or a shape that disagrees with the
/// config, is a FormatError.
ForecasterParams checkpoint_from_string(const std::string& text, Variant variant, const ForecasterConfig& config);
ForecasterParams load_checkpoint(const std::filesystem::path& path, Variant variant, const ForecasterConfig& config);

}  // namespace nmf
