#pragma once

#include <stdexcept>
#include <string>

namespace slender {

// Base for every error the toolkit raises on bad input. Internal invariant
// violations use std::logic_error instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Degenerate or otherwise invalid geometry (collinear polygons, empty sets).
class GeometryError : public Error {
public:
    using Error::Error;
};

// Malformed document. byte_offset() is the position reported by the parser.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what), offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Dangling references, duplicate ids, id collisions.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// A metric that cannot be computed for the requested stratum.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Caller asked for something inconsistent (bad config, unannotated data).
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace slender
