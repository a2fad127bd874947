#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace cyborg {

using Timestamp = std::chrono::sys_seconds;
using Day = std::chrono::sys_days;

// Strict "YYYY-MM-DDTHH:MM:SSZ"; rejects out-of-range fields and invalid dates.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

// "YYYY-MM-DD"
std::optional<Day> parse_day(std::string_view text);
std::string format_day(Day d);

// "YYYY-MM"
std::string format_month(Day d);

inline Day day_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

}  // namespace cyborg
