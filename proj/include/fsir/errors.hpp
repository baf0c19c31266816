#pragma once

#include <stdexcept>
#include <string>

namespace fsir {

/// Two curves (or a curve and a model) do not share a sampling grid.
class GridMismatchError : public std::runtime_error {
public:
    explicit GridMismatchError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; the message names the offending row/column.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Estimation failed (degenerate criterion, bad start point, empty selection).
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested dimension exceeds what the data or basis supports.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace fsir
