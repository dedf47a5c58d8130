#pragma once

#include "json.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace fmicl {

//! printf("%.17g"), so that every double round-trips.
std::string
format_double(double v);

//! Writes `contents` verbatim (binary mode, no newline translation).
//! Like nlohmann::json::dump, but floating-point numbers go through
//! format_double and non-finite ones become null. indent < 0 is compact.
std::string
dump_json(const nlohmann::json& j, int indent = 2);

void
write_text_file(const std::filesystem::path& path, std::string_view contents);

std::string
read_text_file(const std::filesystem::path& path);

} // namespace fmicl
