#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"

namespace fsir {

enum class CsvLayout {
    Combined,  ///< first column is the response, remaining columns are curve values
    CurvesOnly ///< every column is a curve value (prediction-only sets)
};

struct CsvOptions {
    CsvLayout layout = CsvLayout::Combined;
    bool grid_row = false;              ///< first data row holds the grid points
    std::string responses_path = {};    ///< split layout: one response per line
};

namespace detail {

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                         const std::string& path) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r')) --e;
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e || b == e)
        throw ParseError(path + ": non-numeric cell at row " + std::to_string(row + 1) +
                         ", column " + std::to_string(col + 1) + " ('" + cell + "')");
    return v;
}

inline std::vector<std::vector<double>> read_numeric_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // skip blank and comment lines
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            ++lineno;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ','))
            row.push_back(parse_cell(cell, lineno, col++, path));
        rows.push_back(std::move(row));
        ++lineno;
    }
    if (rows.empty()) throw ParseError(path + ": empty file");
    return rows;
}

} // namespace detail

/// Load a CurveSet from CSV (UTF-8, comma separated, '.' decimal).
/// Without a grid row the grid defaults to equispaced points on [0,1].
inline CurveSet load_csv(const std::string& path, const CsvOptions& opts = {}) {
    auto rows = detail::read_numeric_rows(path);

    GridPtr grid;
    std::size_t start = 0;
    const std::size_t lead = (opts.layout == CsvLayout::Combined) ? 1 : 0;
    if (opts.grid_row) {
        grid = std::make_shared<const TimeGrid>(rows[0]);
        start = 1;
        if (rows.size() == 1) throw ParseError(path + ": grid row but no curve rows");
    }
    const std::size_t want = rows[start].size();
    if (want <= lead) throw ParseError(path + ": row 1 has no curve values");
    for (std::size_t r = start; r < rows.size(); ++r)
        if (rows[r].size() != want)
            throw ParseError(path + ": ragged row " + std::to_string(r + 1) + " (" +
                             std::to_string(rows[r].size()) + " cells, expected " +
                             std::to_string(want) + ")");
    const std::size_t m = want - lead;
    if (!grid)
        grid = TimeGrid::equispaced(0.0, 1.0, m);
    else if (grid->size() != m)
        throw ParseError(path + ": grid row has " + std::to_string(grid->size()) +
                         " points but rows carry " + std::to_string(m) + " curve values");

    std::vector<Curve> curves;
    std::optional<std::vector<double>> ys;
    if (opts.layout == CsvLayout::Combined) ys.emplace();
    for (std::size_t r = start; r < rows.size(); ++r) {
        if (ys) ys->push_back(rows[r][0]);
        curves.emplace_back(grid, std::vector<double>(rows[r].begin() + static_cast<long>(lead),
                                                      rows[r].end()));
    }

    if (!opts.responses_path.empty()) {
        auto yr = detail::read_numeric_rows(opts.responses_path);
        std::vector<double> y;
        for (std::size_t r = 0; r < yr.size(); ++r) {
            if (yr[r].size() != 1)
                throw ParseError(opts.responses_path + ": expected one value per row, row " +
                                 std::to_string(r + 1) + " has " + std::to_string(yr[r].size()));
            y.push_back(yr[r][0]);
        }
        if (y.size() != curves.size())
            throw ParseError(opts.responses_path + ": " + std::to_string(y.size()) +
                             " responses for " + std::to_string(curves.size()) + " curves");
        ys = std::move(y);
    }
    return CurveSet(grid, std::move(curves), std::move(ys));
}

} // namespace fsir
