#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "egocl/common.hpp"

namespace egocl {

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temp file in the same directory plus rename, so readers never
/// observe a partially written artifact.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);

std::vector<std::string_view> split_view(std::string_view line, char sep);
std::string_view trim_view(std::string_view s);

inline bool parse_double(std::string_view s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

inline bool parse_int64(std::string_view s, int64_t& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

}  // namespace egocl
