#pragma once

#include <cstdint>
#include <string>

namespace staycast {

/// Timestamp with second resolution. Comparisons order by instant;
/// civil-time arithmetic (day windows, hour-of-day) uses local time,
/// i.e. epoch_sec + offset_sec.
struct Timestamp {
    std::int64_t epoch_sec = 0;   // seconds since 1970-01-01T00:00:00Z
    std::int32_t offset_sec = 0;  // UTC offset carried by the source string

    std::int64_t local_sec() const { return epoch_sec + offset_sec; }

    friend bool operator==(const Timestamp& a, const Timestamp& b) {
        return a.epoch_sec == b.epoch_sec;
    }
    friend bool operator<(const Timestamp& a, const Timestamp& b) {
        return a.epoch_sec < b.epoch_sec;
    }
    friend bool operator<=(const Timestamp& a, const Timestamp& b) {
        return a.epoch_sec <= b.epoch_sec;
    }
    friend bool operator>=(const Timestamp& a, const Timestamp& b) {
        return a.epoch_sec >= b.epoch_sec;
    }
};

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(std::int64_t days, int& year, unsigned& month, unsigned& day);

/// Parse ISO-8601 "YYYY-MM-DD[T ]HH:MM:SS" with optional "Z" or "+HH:MM"
/// offset. Throws std::invalid_argument on malformed input.
Timestamp parse_timestamp(const std::string& s);
std::string format_timestamp(const Timestamp& t);

/// "YYYY-MM-DD" -> days since epoch (and back).
std::int64_t parse_date(const std::string& s);
std::string format_date(std::int64_t days);

/// Local hour of day in [0, 24).
double local_hour(const Timestamp& t);
int local_hour_int(const Timestamp& t);

// FNV-1a, used to derive per-vehicle seeds from ids.
std::uint64_t fnv1a(const std::string& s);

/// Stable mix of a base seed with stream indices.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace staycast
