#pragma once

#include <filesystem>
#include <string>

namespace ggq {

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double value);

/// Writes `content` to `path` atomically enough for our purposes: a sibling
/// temporary file is renamed over the target.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// 64-bit FNV-1a of `data`, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace ggq
