/// @file  csv.hpp
/// @brief Minimal comma-separated reader/writer used for every tripcast file format.

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace tripcast::csv {

/// One data row plus its 1-based line number in the source file.
struct Row {
    std::size_t line{};
    std::vector<std::string> fields;
};

struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<Row> rows;
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.emplace_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                              : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

/// Parses CSV text whose first non-empty line must equal @p expected_header.
inline Table parse(std::istream& in, const std::string& source,
                   const std::vector<std::string>& expected_header) {
    Table table;
    table.source = source;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (lineno == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (trim(view).empty()) continue;
        auto fields = split(view);
        if (!have_header) {
            if (fields != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw ParseError(source, lineno, "expected header '" + want + "'");
            }
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != expected_header.size()) {
            throw ParseError(source, lineno,
                             "expected " + std::to_string(expected_header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        }
        table.rows.push_back({lineno, std::move(fields)});
    }
    if (!have_header) throw ParseError(source, lineno == 0 ? 1 : lineno, "missing header");
    return table;
}

inline Table read_file(const std::filesystem::path& path,
                       const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("file not found: " + path.string());
    return parse(in, path.string(), expected_header);
}

inline long long to_int(const Row& row, std::size_t col, const std::string& source) {
    const auto& s = row.fields.at(col);
    long long v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError(source, row.line, "not an integer: '" + s + "'");
    }
    return v;
}

inline double to_double(const Row& row, std::size_t col, const std::string& source) {
    const auto& s = row.fields.at(col);
    double v{};
    const char* first = s.data();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError(source, row.line, "not a number: '" + s + "'");
    }
    return v;
}

/// Formats with 12 significant digits, the precision every tripcast CSV uses.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Buffered writer that only touches the filesystem on flush().
class Writer {
public:
    explicit Writer(std::vector<std::string> header) {
        row_strings(header);
    }

    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    [[nodiscard]] std::string str() const { return out_.str(); }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + path.string());
        f << out_.str();
    }

private:
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

    static std::string cell(double v) { return fmt(v); }
    static std::string cell(float v) { return fmt(v); }
    static std::string cell(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + '"';
    }
    static std::string cell(const char* s) { return cell(std::string(s)); }
    template <typename I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

    std::ostringstream out_;
};

}  // namespace tripcast::csv
