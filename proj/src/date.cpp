#include "finreport/date.hpp"

#include <charconv>
#include <cstdio>

#include "finreport/error.hpp"

namespace finreport {

Date Date::parse(std::string_view text) {
    auto bad = [&] { return ValidationError("invalid date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0, d = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        if (ec != std::errc{} || ptr != text.data() + pos + len) throw bad();
    };
    field(0, 4, y);
    field(5, 2, m);
    field(8, 2, d);
    Date out(y, m, d);
    if (!out.ymd_.ok()) throw bad();
    return out;
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd_.year()),
                  static_cast<unsigned>(ymd_.month()), static_cast<unsigned>(ymd_.day()));
    return buf;
}

bool Date::is_weekday() const {
    const std::chrono::weekday wd{days()};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

Date Date::next_day() const { return Date(std::chrono::year_month_day{days() + std::chrono::days{1}}); }

}  // namespace finreport
