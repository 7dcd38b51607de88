#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "anovats/error.hpp"
#include "anovats/panel.hpp"

namespace anovats {

/// long: one row per (area, time[, dim]) cell; wide: one column per area.
enum class CsvLayout { long_format, wide_format };

namespace csv_detail {

using Row = std::vector<std::string>;

// RFC-4180 records: quoted fields may contain separators, doubled quotes and
// line breaks. Returns the records together with their starting line numbers.
inline std::vector<std::pair<std::size_t, Row>> parse_records(std::istream& in) {
    std::vector<std::pair<std::size_t, Row>> records;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto end_record = [&] {
        row.push_back(std::move(field));
        field.clear();
        const bool blank = row.size() == 1 && row.front().empty() && !field_started;
        if (!blank) records.emplace_back(record_line, std::move(row));
        row.clear();
        field_started = false;
    };

    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (in_quotes) {
            if (c == '"') {
                if (k + 1 < text.size() && text[k + 1] == '"') {
                    field.push_back('"');
                    ++k;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++line;
                record_line = line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw Error("panel", "unterminated quoted field starting on line " + std::to_string(record_line));
    if (field_started || !field.empty() || !row.empty()) end_record();
    return records;
}

inline bool is_missing_token(std::string_view token) { return token.empty() || token == "NA"; }

inline double parse_number(std::string_view token, std::size_t line) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        throw Error("panel", "non-numeric value '" + std::string(token) + "' on line " + std::to_string(line));
    return value;
}

inline bool is_integer_label(const std::string& s) {
    if (s.empty()) return false;
    std::size_t start = (s[0] == '-') ? 1 : 0;
    if (start == s.size()) return false;
    return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(start), s.end(),
                       [](unsigned char ch) { return std::isdigit(ch) != 0; });
}

inline bool is_year_month_label(const std::string& s) {
    if (s.size() != 7 || s[4] != '-') return false;
    for (std::size_t k = 0; k < 7; ++k) {
        if (k != 4 && std::isdigit(static_cast<unsigned char>(s[k])) == 0) return false;
    }
    return true;
}

// Integer labels (years) sort numerically and YYYY-MM labels sort
// chronologically; any other labelling keeps first-appearance order.
inline void order_time_labels(std::vector<std::string>& times) {
    if (std::all_of(times.begin(), times.end(), is_integer_label)) {
        std::stable_sort(times.begin(), times.end(),
                         [](const std::string& x, const std::string& y) { return std::stoll(x) < std::stoll(y); });
    } else if (std::all_of(times.begin(), times.end(), is_year_month_label)) {
        std::stable_sort(times.begin(), times.end());
    }
}

inline std::string format_number(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::size_t index_of(std::vector<std::string>& order, std::unordered_map<std::string, std::size_t>& lookup,
                            const std::string& key) {
    const auto [it, inserted] = lookup.emplace(key, order.size());
    if (inserted) order.push_back(key);
    return it->second;
}

inline Panel parse_long(const std::vector<std::pair<std::size_t, Row>>& records) {
    const Row& header = records.front().second;
    const bool with_dim = header == Row{"area", "time", "dim", "value"};
    if (!with_dim && header != Row{"area", "time", "value"})
        throw Error("panel", "long layout expects header 'area,time,value' or 'area,time,dim,value'");
    const std::size_t columns = header.size();

    struct Cell {
        std::size_t area, time, dim;
        double value;
        bool missing;
    };
    std::vector<std::string> areas, times, dims;
    std::unordered_map<std::string, std::size_t> area_ix, time_ix, dim_ix;
    std::vector<Cell> cells;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> seen;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& [line, row] = records[r];
        if (row.size() != columns)
            throw Error("panel", "line " + std::to_string(line) + " has " + std::to_string(row.size()) +
                                     " fields, expected " + std::to_string(columns));
        if (row[0].empty()) throw Error("panel", "empty area name on line " + std::to_string(line));
        if (row[1].empty()) throw Error("panel", "empty time label on line " + std::to_string(line));
        Cell cell{};
        cell.area = index_of(areas, area_ix, row[0]);
        cell.time = index_of(times, time_ix, row[1]);
        cell.dim = with_dim ? index_of(dims, dim_ix, row[2]) : 0;
        const std::string& token = row[columns - 1];
        cell.missing = is_missing_token(token);
        cell.value = cell.missing ? std::numeric_limits<double>::quiet_NaN() : parse_number(token, line);
        const auto [it, inserted] = seen.emplace(std::make_tuple(cell.area, cell.time, cell.dim), line);
        if (!inserted)
            throw Error("panel", "duplicate cell (" + row[0] + ", " + row[1] + (with_dim ? ", " + row[2] : "") +
                                     ") on line " + std::to_string(line) + ", first seen on line " +
                                     std::to_string(it->second));
        cells.push_back(cell);
    }
    if (areas.size() < 2) throw InapplicableError("panel", "at least 2 areas are required");

    std::vector<std::string> ordered_times = times;
    order_time_labels(ordered_times);
    std::vector<std::size_t> time_pos(times.size());
    for (std::size_t k = 0; k < ordered_times.size(); ++k) time_pos[time_ix.at(ordered_times[k])] = k;

    const std::size_t n = times.size();
    const std::size_t p = with_dim ? dims.size() : 1;
    std::vector<double> values(areas.size() * n * p, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> missing(values.size(), 1);
    for (const Cell& cell : cells) {
        const std::size_t k = (cell.area * n + time_pos[cell.time]) * p + cell.dim;
        values[k] = cell.value;
        missing[k] = cell.missing ? 1 : 0;
    }
    return Panel(std::move(areas), n, p, std::move(values), std::move(missing), std::move(ordered_times),
                 with_dim ? std::move(dims) : std::vector<std::string>{});
}

inline Panel parse_wide(const std::vector<std::pair<std::size_t, Row>>& records) {
    const Row& header = records.front().second;
    const bool with_time = !header.empty() && header.front() == "time";
    const std::size_t first_area = with_time ? 1 : 0;
    std::vector<std::string> areas(header.begin() + static_cast<std::ptrdiff_t>(first_area), header.end());
    if (areas.size() < 2) throw InapplicableError("panel", "at least 2 areas are required");

    const std::size_t n = records.size() - 1;
    if (n == 0) throw Error("panel", "wide layout has no data rows");
    const std::size_t a = areas.size();
    std::vector<double> values(a * n, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> missing(a * n, 1);
    std::vector<std::string> times;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& [line, row] = records[t + 1];
        if (row.size() != header.size())
            throw Error("panel", "line " + std::to_string(line) + " has " + std::to_string(row.size()) +
                                     " fields, expected " + std::to_string(header.size()));
        if (with_time) {
            if (std::find(times.begin(), times.end(), row[0]) != times.end())
                throw Error("panel", "duplicate time '" + row[0] + "' on line " + std::to_string(line));
            times.push_back(row[0]);
        }
        for (std::size_t i = 0; i < a; ++i) {
            const std::string& token = row[first_area + i];
            if (is_missing_token(token)) continue;
            values[i * n + t] = parse_number(token, line);
            missing[i * n + t] = 0;
        }
    }
    return Panel(std::move(areas), n, 1, std::move(values), std::move(missing), std::move(times));
}

}  // namespace csv_detail

/**
 * Reads a panel from CSV text.
 *
 * Long layout: header `area,time,value` (or `area,time,dim,value`), groups in
 * order of first appearance, cells absent from the file become missing.
 * Wide layout: optional leading `time` column, then one column per area.
 * Empty cells and the literal `NA` are missing.
 */
[[nodiscard]] inline Panel parse_csv(std::istream& in, CsvLayout layout) {
    const auto records = csv_detail::parse_records(in);
    if (records.empty()) throw Error("panel", "CSV input is empty");
    return layout == CsvLayout::long_format ? csv_detail::parse_long(records) : csv_detail::parse_wide(records);
}

[[nodiscard]] inline Panel read_csv(const std::string& path, CsvLayout layout) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("panel", "cannot open '" + path + "'");
    return parse_csv(in, layout);
}

/// Writes the panel with shortest round-trip number formatting, so that
/// parsing the output reproduces every observed value bit for bit.
inline void write_csv(std::ostream& out, const Panel& panel, CsvLayout layout) {
    using csv_detail::format_number;
    using csv_detail::quote;
    const std::size_t n = panel.num_times();
    const std::size_t p = panel.dim();
    auto time_label = [&](std::size_t t) {
        return panel.time_index().empty() ? std::to_string(t + 1) : panel.time_index()[t];
    };
    auto cell = [&](std::size_t i, std::size_t t, std::size_t d) {
        return panel.is_missing(i, t, d) ? std::string("NA") : format_number(panel.value(i, t, d));
    };

    if (layout == CsvLayout::long_format) {
        const bool with_dim = p > 1 || !panel.dim_labels().empty();
        out << (with_dim ? "area,time,dim,value\n" : "area,time,value\n");
        for (std::size_t i = 0; i < panel.num_groups(); ++i) {
            for (std::size_t t = 0; t < n; ++t) {
                for (std::size_t d = 0; d < p; ++d) {
                    out << quote(panel.labels()[i]) << ',' << quote(time_label(t)) << ',';
                    if (with_dim)
                        out << quote(panel.dim_labels().empty() ? std::to_string(d + 1) : panel.dim_labels()[d])
                            << ',';
                    out << cell(i, t, d) << '\n';
                }
            }
        }
        return;
    }

    if (p != 1) throw Error("panel", "wide layout supports one-dimensional panels only");
    const bool with_time = !panel.time_index().empty();
    if (with_time) out << "time";
    for (std::size_t i = 0; i < panel.num_groups(); ++i) {
        if (with_time || i > 0) out << ',';
        out << quote(panel.labels()[i]);
    }
    out << '\n';
    for (std::size_t t = 0; t < n; ++t) {
        if (with_time) out << quote(panel.time_index()[t]);
        for (std::size_t i = 0; i < panel.num_groups(); ++i) {
            if (with_time || i > 0) out << ',';
            out << cell(i, t, 0);
        }
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const Panel& panel, CsvLayout layout) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("panel", "cannot write '" + path + "'");
    write_csv(out, panel, layout);
}

}  // namespace anovats
