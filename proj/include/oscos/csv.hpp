#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "oscos/error.hpp"

namespace oscos {

/// Minimal reader for the comma-separated tables this project writes (no quoting).
struct CsvTable {
    std::string what;
    std::vector<std::string> header;
    std::map<std::string, std::size_t> column;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline CsvTable read_csv(std::istream& in, std::string what)
{
    CsvTable t;
    t.what = std::move(what);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(t.what + ": missing header line");
    t.header = split_csv_line(line);
    for (std::size_t i = 0; i < t.header.size(); ++i)
        t.column[t.header[i]] = i;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        auto fields = split_csv_line(line);
        if (fields.size() != t.header.size())
            throw IoError(t.what + ": row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

/// Typed accessor for one row of a CsvTable.
struct CsvRow {
    const CsvTable& table;
    std::size_t index;

    bool has(const std::string& name) const { return table.column.count(name) != 0; }

    const std::string& text(const std::string& name) const
    {
        auto it = table.column.find(name);
        if (it == table.column.end())
            throw IoError(table.what + ": missing column '" + name + "'");
        return table.rows[index][it->second];
    }

    template <typename T>
    T parse(const std::string& name) const
    {
        const std::string& s = text(name);
        T value{};
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw IoError(table.what + ": bad value '" + s + "' in column '" + name + "' at row " + std::to_string(index + 1));
        return value;
    }

    double get_double(const std::string& name) const { return parse<double>(name); }
    std::int64_t get_int(const std::string& name) const { return parse<std::int64_t>(name); }
    std::uint64_t get_uint(const std::string& name) const { return parse<std::uint64_t>(name); }
};

} // namespace oscos
