#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace laf {

/// Identifier syntax shared by pids, rids, nids, gids, lids, category ids
/// and language codes: [A-Za-z0-9_.-]+
bool is_identifier(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, char sep);

std::optional<std::uint64_t> parse_u64(std::string_view s);
std::optional<std::int64_t> parse_i64(std::string_view s);

std::string to_hex16(std::uint64_t v);  // fixed-width, lowercase

/// Number of code points in a UTF-8 string. Malformed bytes count as one
/// code point each, which keeps slicing byte-preserving on any input.
std::size_t utf8_length(std::string_view text);

/// Substring covering code points [from, to). Clamped to the text length.
std::string utf8_slice(std::string_view text, std::size_t from, std::size_t to);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a64_mix(std::uint64_t a, std::uint64_t b);

}  // namespace laf
