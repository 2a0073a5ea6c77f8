#pragma once

#include "emuval/sample.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace emuval {

/// Parses one draw per line, D numeric columns, optional header row.
/// Numbers use '.' as the decimal separator regardless of locale.
Sample parse_sample_csv(std::istream& in, std::string_view source = "<stream>");
Sample read_sample_csv(const std::filesystem::path& path);

void write_sample_csv(std::ostream& out, const Sample& sample);
void write_sample_csv(const std::filesystem::path& path, const Sample& sample);

/// Shortest representation that round-trips, independent of locale.
std::string format_double(double value);

}  // namespace emuval
