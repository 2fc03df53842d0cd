#pragma once

#include <string>

namespace slender {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Reads a whole file; throws UsageError when it cannot be opened.
std::string read_file(const std::string& path);

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace slender
