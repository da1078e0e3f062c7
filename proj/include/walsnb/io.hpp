#pragma once

// CSV plumbing and numeric formatting shared by the engines and the CLI.
// All floating-point output uses 17 significant digits so that written
// values round-trip bit exactly.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "walsnb/errors.hpp"

namespace walsnb {

inline std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// A parsed CSV with a header row; cells kept as strings, typed on access.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t n_rows() const { return rows.size(); }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j] == name) return j;
        }
        throw CsvError("missing column: " + name);
    }

    double numeric(std::size_t row, std::size_t col) const {
        const std::string& cell = rows[row][col];
        if (cell.empty()) {
            throw CsvError("missing value at row " + std::to_string(row + 2) +
                           ", column " + columns[col]);
        }
        std::size_t pos = 0;
        double value = 0.0;
        try {
            value = std::stod(cell, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != cell.size()) {
            throw CsvError("non-numeric value '" + cell + "' at row " +
                           std::to_string(row + 2) + ", column " + columns[col]);
        }
        if (std::isnan(value)) {
            throw CsvError("NaN at row " + std::to_string(row + 2) +
                           ", column " + columns[col]);
        }
        return value;
    }
};

// Reads a CSV with a mandatory header row. Lines starting with '#' carry
// embedded metadata and are skipped.
inline RawTable read_csv(std::istream& in, const std::string& origin) {
    RawTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (!have_header) {
            table.columns = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.columns.size()) {
            throw CsvError(origin + ": row " + std::to_string(table.rows.size() + 2) +
                           " has " + std::to_string(cells.size()) + " fields, expected " +
                           std::to_string(table.columns.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw CsvError(origin + ": no header row");
    return table;
}

inline RawTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    return read_csv(in, path);
}

}  // namespace walsnb
