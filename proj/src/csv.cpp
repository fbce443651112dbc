#include "finreport/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "finreport/error.hpp"

namespace finreport::csv {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double to_double(std::string_view field) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw ValidationError("not a finite number: '" + std::string(field) + "'");
    return value;
}

std::string format(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        out.emplace_back(number, line);
    }
    return out;
}

}  // namespace finreport::csv

#include <fstream>
#include <ostream>

namespace finreport::csv {

void write_hash_comment(std::ostream& out, const std::string& config_hash) {
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << '\n';
}

std::string peek_config_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    if (!std::getline(in, line)) return {};
    constexpr std::string_view prefix = "# config_hash=";
    if (line.rfind(prefix, 0) != 0) return {};
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line.substr(prefix.size());
}

}  // namespace finreport::csv
