#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "rht/course_space.hpp"
#include "rht/error.hpp"

namespace rht {

/// Items read from an ingestion file. `units[k]` is the unit column of
/// item k, or 0 when the line had none.
struct ItemFile {
    std::vector<CourseItem> items;
    std::vector<int> units;
    std::vector<std::size_t> lines;

    bool has_units() const
    {
        for (int u : units) {
            if (u != 0) {
                return true;
            }
        }
        return false;
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_commas(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) {
            return out;
        }
        start = comma + 1;
    }
}

inline bool parse_int64(const std::string& s, long long& out)
{
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtoll(s.c_str(), &end, 10);
    return errno == 0 && *end == '\0';
}

inline bool parse_real(const std::string& s, double& out)
{
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && *end == '\0';
}

} // namespace detail

/// Parses `id,f1,...,fk[,unit]` lines. Up to d_C features are accepted
/// (missing trailing ones become 0 on ingestion); a line with d_C + 1 values
/// after the id carries a unit column. Blank lines and lines starting with
/// '#' are skipped. Errors name the offending line.
inline ItemFile read_items(std::istream& in, int d_c)
{
    if (d_c < 1) {
        throw Error(ErrorCode::invalid_config, "d_c must be positive");
    }
    ItemFile out;
    std::unordered_map<ItemId, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;
    auto fail = [&](ErrorCode code, const std::string& what) {
        throw Error(code, "line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto fields = detail::split_commas(line);
        long long id = 0;
        if (!detail::parse_int64(fields[0], id)) {
            fail(ErrorCode::malformed_input, "item id '" + fields[0] + "' is not an integer");
        }
        const std::size_t values = fields.size() - 1;
        if (values > static_cast<std::size_t>(d_c) + 1) {
            fail(ErrorCode::malformed_input, std::to_string(values) + " values after the id, expected at most " +
                                                 std::to_string(d_c) + " features and a unit");
        }
        const bool has_unit = values == static_cast<std::size_t>(d_c) + 1;
        CourseItem item;
        item.id = id;
        for (std::size_t k = 1; k <= values - (has_unit ? 1 : 0); ++k) {
            double v = 0.0;
            if (!detail::parse_real(fields[k], v)) {
                fail(ErrorCode::malformed_input, "feature '" + fields[k] + "' is not a number");
            }
            if (!(v >= 0.0 && v <= 1.0)) {
                fail(ErrorCode::invalid_item, "feature " + fields[k] + " of item " + fields[0] + " outside [0,1]");
            }
            item.features.push_back(v);
        }
        int unit = 0;
        if (has_unit) {
            long long u = 0;
            if (!detail::parse_int64(fields.back(), u) || u < 1 || u > (1 << 30)) {
                fail(ErrorCode::malformed_input, "unit '" + fields.back() + "' is not a positive integer");
            }
            unit = static_cast<int>(u);
        }
        const auto [it, fresh] = seen.emplace(item.id, line_no);
        if (!fresh) {
            fail(ErrorCode::duplicate_item,
                 "duplicate item id " + fields[0] + " (first seen on line " + std::to_string(it->second) + ")");
        }
        out.items.push_back(std::move(item));
        out.units.push_back(unit);
        out.lines.push_back(line_no);
    }
    return out;
}

inline ItemFile read_items_file(const std::string& path, int d_c)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::malformed_input, "cannot open item file " + path);
    }
    try {
        return read_items(in, d_c);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

/// Writes items in the ingestion format, with a unit column when `units`
/// is non-empty. Values use 17 significant digits so they read back exactly.
inline void write_items(std::ostream& out, const std::vector<CourseItem>& items, const std::vector<int>& units = {})
{
    char buf[40];
    for (std::size_t k = 0; k < items.size(); ++k) {
        out << items[k].id;
        for (double f : items[k].features) {
            std::snprintf(buf, sizeof buf, "%.17g", f);
            out << ',' << buf;
        }
        if (!units.empty()) {
            out << ',' << units[k];
        }
        out << '\n';
    }
}

} // namespace rht
