// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace typeforge {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Replaces invalid UTF-8 sequences with U+FFFD. `replaced` is set when any were found.
std::string sanitize_utf8(std::string_view bytes, bool& replaced);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view text) noexcept;

std::string trim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view text, std::string_view prefix) noexcept;
bool contains(std::string_view text, std::string_view needle) noexcept;

/// Keeps the first `max_words` whitespace-separated words.
std::string truncate_words(std::string_view text, std::size_t max_words);
std::size_t word_count(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Replaces every `{{key}}` occurrence using `values` (key, value) pairs.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

/// Runs fn(0..count-1) on up to `parallelism` threads; rethrows the first failure by index.
void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

} // namespace typeforge
