// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qegm {

/// FNV-1a 64-bit. Used for config/dataset provenance hashes; not crypto.
std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);

/// Hex FNV-1a of a file's raw bytes.
std::string hash_file(const std::string& path);

/// Shortest decimal form that round-trips to the same double. All emitted
/// data files use this so reruns are byte-identical.
std::string format_double(double value);

bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace qegm
