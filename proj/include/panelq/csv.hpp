#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "panelq/panel.hpp"

namespace panelq {

/// Parse failure with a machine-readable code and 1-based line number.
struct CsvError : std::runtime_error {
    std::string code;
    std::size_t line;
    CsvError(std::string code_, std::size_t line_, const std::string& message)
        : std::runtime_error(message), code(std::move(code_)), line(line_) {}
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
            f.remove_suffix(1);
    }
    return out;
}

inline double parse_real(std::string_view field, std::size_t line, const std::string& column) {
    double value;
    const char* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw CsvError("csv-bad-number", line,
                       "column '" + column + "' has non-numeric cell '" + std::string(field) + "'");
    return value;
}

inline std::int64_t parse_id(std::string_view field, std::size_t line) {
    std::int64_t value;
    const char* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw CsvError("csv-bad-number", line,
                       "column 'id' has non-integer cell '" + std::string(field) + "'");
    return value;
}

}  // namespace detail

/// Long-format panel CSV: header `id,time,y,<x1>,...,<xp>`, one observation
/// per row. Rows may arrive in any order; individuals are sorted by id and
/// observations by time. Duplicate (id,time) pairs and missing or
/// non-numeric cells are rejected with the offending line number.
inline PanelData parse_panel_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw CsvError("csv-missing-header", 1, "empty input");
    ++lineno;
    const auto header = detail::split_fields(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "time" || header[2] != "y")
        throw CsvError("csv-missing-column", 1, "header must start with id,time,y");
    const int p = static_cast<int>(header.size()) - 3;
    std::vector<std::string> x_names(header.begin() + 3, header.end());

    struct Row {
        std::int64_t id;
        double time;
        double y;
        std::vector<double> x;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size())
            throw CsvError("csv-missing-cell", lineno,
                           "expected " + std::to_string(header.size()) + " cells, found " +
                               std::to_string(fields.size()));
        Row r;
        r.line = lineno;
        r.id = detail::parse_id(fields[0], lineno);
        r.time = detail::parse_real(fields[1], lineno, "time");
        r.y = detail::parse_real(fields[2], lineno, "y");
        r.x.reserve(p);
        for (int j = 0; j < p; ++j)
            r.x.push_back(detail::parse_real(fields[3 + j], lineno, x_names[j]));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw CsvError("csv-no-rows", lineno, "no observations");

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.time < b.time;
    });
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].id == rows[r - 1].id && rows[r].time == rows[r - 1].time)
            throw CsvError("csv-duplicate-key", rows[r].line,
                           "duplicate (id,time) pair (" + std::to_string(rows[r].id) + "," +
                               std::to_string(rows[r].time) + ")");

    PanelData data;
    data.p = p;
    data.x_names = std::move(x_names);
    for (const Row& r : rows) {
        if (data.unit_labels.empty() || data.unit_labels.back() != r.id) {
            data.unit_labels.push_back(r.id);
            data.t_len.push_back(0);
        }
        ++data.t_len.back();
        data.id.push_back(static_cast<int>(data.unit_labels.size()) - 1);
        data.y.push_back(r.y);
        data.time.push_back(r.time);
        data.x.insert(data.x.end(), r.x.begin(), r.x.end());
    }
    data.n = static_cast<int>(data.unit_labels.size());
    data.validate();
    return data;
}

inline PanelData parse_panel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("io-open-failed", 0, "cannot open '" + path + "'");
    return parse_panel_csv(in);
}

/// Writes the panel back out, values at full double round-trip precision.
inline void write_panel_csv(const PanelData& data, std::ostream& out) {
    out << "id,time,y";
    for (int j = 0; j < data.p; ++j) {
        if (j < static_cast<int>(data.x_names.size()))
            out << ',' << data.x_names[j];
        else
            out << ",x" << (j + 1);
    }
    out << '\n';
    char buf[64];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const std::int64_t label =
            data.unit_labels.empty() ? data.id[r] + 1 : data.unit_labels[data.id[r]];
        out << label << ',';
        emit(data.time.empty() ? static_cast<double>(r) : data.time[r]);
        out << ',';
        emit(data.y[r]);
        for (int j = 0; j < data.p; ++j) {
            out << ',';
            emit(data.xat(r, j));
        }
        out << '\n';
    }
}

inline void write_panel_csv(const PanelData& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw CsvError("io-open-failed", 0, "cannot open '" + path + "' for writing");
    write_panel_csv(data, out);
}

}  // namespace panelq
