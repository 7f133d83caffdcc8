#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace islock {

/// Number rounded to 6 significant digits; ±inf and NaN become the strings
/// "inf", "-inf", "nan". Keeps reports diffable across runs.
nlohmann::json canonical_number(double x);

/// Compact dump with sorted keys, newline-terminated.
std::string canonical_dump(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace islock
