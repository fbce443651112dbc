#pragma once

#include <chrono>
#include <compare>
#include <functional>
#include <string>
#include <string_view>

namespace finreport {

// Calendar date, ISO-8601 (YYYY-MM-DD) on the wire.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::year_month_day ymd) : ymd_(ymd) {}
    Date(int y, unsigned m, unsigned d)
        : ymd_(std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}) {}

    // Throws ValidationError on anything that is not a valid YYYY-MM-DD date.
    static Date parse(std::string_view text);

    std::string iso() const;
    std::chrono::sys_days days() const { return std::chrono::sys_days{ymd_}; }
    bool is_weekday() const;
    Date next_day() const;

    friend bool operator==(const Date&, const Date&) = default;
    friend auto operator<=>(const Date& a, const Date& b) { return a.days() <=> b.days(); }

private:
    std::chrono::year_month_day ymd_{std::chrono::year{1970} / 1 / 1};
};

}  // namespace finreport
