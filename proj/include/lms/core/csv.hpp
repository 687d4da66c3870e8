#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lms/core/error.hpp"

namespace lms::csv {

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws DataError when absent.
    std::size_t col(const std::string& name) const;
};

// Comma-separated, header row required, UTF-8, no quoting. CRLF tolerated.
// Throws DataError on missing file or ragged rows (naming file and row).
Table read_file(const std::string& path);
Table read_string(const std::string& content, const std::string& label);

class Writer {
public:
    explicit Writer(std::vector<std::string> header);
    void add_row(std::vector<std::string> row);
    // Serialize; rows appear in insertion order, fields joined by commas.
    std::string to_string() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double v);
// Strict full-string parses; nullopt on failure or empty.
std::optional<double> parse_double(const std::string& s);
std::optional<std::int64_t> parse_int(const std::string& s);

}  // namespace lms::csv
