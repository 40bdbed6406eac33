#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string_view>

namespace ifqa {

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void atomic_write(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);

/// Same, for writers that need a path (e.g. torch archives).
void atomic_write_with(const std::filesystem::path& path,
                       const std::function<void(const std::filesystem::path&)>& writer);

}  // namespace ifqa
