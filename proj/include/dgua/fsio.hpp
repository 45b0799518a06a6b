#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dgua {

// Writes to a sibling temp file then renames, so the target is either the
// complete content or absent.
void atomic_write_file(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace dgua
