#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace finreport::csv {

// Splits one line on commas. No quoting: none of the file schemas carry commas in fields.
std::vector<std::string_view> split(std::string_view line);

// Strict full-field parse; throws ValidationError on garbage.
double to_double(std::string_view field);

// Shortest text that parses back to the same double.
std::string format(double value);

// Reads lines, dropping a trailing '\r' and skipping blank lines and '#' comments.
// Returns (1-based line number, content) pairs.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in);

}  // namespace finreport::csv

#include <filesystem>

namespace finreport::csv {

// Artifacts carry their config hash as a leading "# config_hash=<hex>" line.
void write_hash_comment(std::ostream& out, const std::string& config_hash);
std::string peek_config_hash(const std::filesystem::path& path);

}  // namespace finreport::csv
