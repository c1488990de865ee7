#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rulecheck {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Reads a file of newline-separated records, dropping blank lines.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string trim(const std::string& s);

/// Collapses runs of whitespace to single spaces and trims the ends.
std::string normalize_ws(const std::string& s);

/// Strips every whitespace character; used for split round-trip comparisons.
std::string strip_ws(const std::string& s);

bool starts_with(const std::string& s, const std::string& prefix);

/// Lowercases ASCII letters only; multibyte sequences pass through untouched.
std::string ascii_lower(const std::string& s);

/// SHA-256 of the input, as a lowercase hex string.
std::string sha256_hex(const std::string& data);

/// Removes a surrounding markdown code fence (``` or ```lang) if present.
std::string strip_code_fence(const std::string& text);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions from
/// workers are rethrown on the calling thread after all workers join.
void parallel_for_indexed(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace rulecheck
