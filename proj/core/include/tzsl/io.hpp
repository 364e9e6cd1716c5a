#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tzsl {

// Shortest decimal representation that parses back to the same double.
// Used for every float written to CSV or JSON so that save/load round-trips
// are exact.
std::string format_double(double value);

// Strict parse of a full field; throws ParseError on trailing garbage or an
// empty field. NaN/Inf spellings parse here and are rejected by the callers
// that require finite values.
double parse_double(std::string_view text);

std::string read_text(const std::filesystem::path& path);

// Write to a temporary file in the same directory, then rename, so readers
// never observe a partially written file.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace tzsl
