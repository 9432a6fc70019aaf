#include "staycast/util.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace staycast {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, unsigned& month, unsigned& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = doy - (153 * mp + 2) / 5 + 1;
    month = mp + (mp < 10 ? 3 : -9);
    year = static_cast<int>(y + (month <= 2));
}

namespace {

bool parse_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    return true;
}

}  // namespace

Timestamp parse_timestamp(const std::string& s) {
    int y, mo, d, h, mi, se;
    if (!parse_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || s[7] != '-' ||
        (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':' ||
        !parse_int(s, 5, 2, mo) || !parse_int(s, 8, 2, d) ||
        !parse_int(s, 11, 2, h) || !parse_int(s, 14, 2, mi) || !parse_int(s, 17, 2, se)) {
        throw std::invalid_argument("malformed timestamp: '" + s + "'");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60) {
        throw std::invalid_argument("timestamp field out of range: '" + s + "'");
    }
    std::int32_t offset = 0;
    if (s.size() > 19) {
        const char c = s[19];
        if (c == 'Z' && s.size() == 20) {
            offset = 0;
        } else if ((c == '+' || c == '-') && s.size() == 25 && s[22] == ':') {
            int oh, om;
            if (!parse_int(s, 20, 2, oh) || !parse_int(s, 23, 2, om)) {
                throw std::invalid_argument("malformed timestamp offset: '" + s + "'");
            }
            offset = (oh * 3600 + om * 60) * (c == '+' ? 1 : -1);
        } else {
            throw std::invalid_argument("malformed timestamp offset: '" + s + "'");
        }
    }
    Timestamp t;
    t.offset_sec = offset;
    const std::int64_t local = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
                               h * 3600 + mi * 60 + se;
    t.epoch_sec = local - offset;
    return t;
}

std::string format_timestamp(const Timestamp& t) {
    const std::int64_t local = t.local_sec();
    std::int64_t days = local / 86400;
    std::int64_t sod = local % 86400;
    if (sod < 0) {
        sod += 86400;
        --days;
    }
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[40];
    const int oh = std::abs(t.offset_sec) / 3600;
    const int om = (std::abs(t.offset_sec) % 3600) / 60;
    if (t.offset_sec == 0) {
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", y, mo, d,
                      static_cast<int>(sod / 3600), static_cast<int>((sod % 3600) / 60),
                      static_cast<int>(sod % 60));
    } else {
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d", y, mo, d,
                      static_cast<int>(sod / 3600), static_cast<int>((sod % 3600) / 60),
                      static_cast<int>(sod % 60), t.offset_sec > 0 ? '+' : '-', oh, om);
    }
    return buf;
}

std::int64_t parse_date(const std::string& s) {
    int y, mo, d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        !parse_int(s, 0, 4, y) || !parse_int(s, 5, 2, mo) || !parse_int(s, 8, 2, d) ||
        mo < 1 || mo > 12 || d < 1 || d > 31) {
        throw std::invalid_argument("malformed date: '" + s + "'");
    }
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
}

std::string format_date(std::int64_t days) {
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, mo, d);
    return buf;
}

double local_hour(const Timestamp& t) {
    std::int64_t sod = t.local_sec() % 86400;
    if (sod < 0) sod += 86400;
    return static_cast<double>(sod) / 3600.0;
}

int local_hour_int(const Timestamp& t) {
    return static_cast<int>(local_hour(t));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace staycast
