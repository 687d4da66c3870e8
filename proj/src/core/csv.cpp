#include "lms/core/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace lms::csv {
namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

Table parse_stream(std::istream& in, const std::string& label) {
    Table t;
    t.path = label;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            t.header = split_line(line);
            continue;
        }
        if (line.empty() || line == "\r") continue;
        auto row = split_line(line);
        if (row.size() != t.header.size()) {
            throw DataError(label + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(row.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(label + ": missing header row");
    return t;
}

}  // namespace

std::size_t Table::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataError(path + ": missing column '" + name + "'");
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_stream(in, path);
}

Table read_string(const std::string& content, const std::string& label) {
    std::istringstream in(content);
    return parse_stream(in, label);
}

Writer::Writer(std::vector<std::string> header) : header_(std::move(header)) {}

void Writer::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size())
        throw Error("csv writer: row width " + std::to_string(row.size()) + " != header width " +
                    std::to_string(header_.size()));
    rows_.push_back(std::move(row));
}

std::string Writer::to_string() const {
    std::string out;
    auto join = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out.push_back(',');
            out += fields[i];
        }
        out.push_back('\n');
    };
    join(header_);
    for (const auto& r : rows_) join(r);
    return out;
}

void Writer::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << to_string();
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "0";
    return std::string(buf, ptr);
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace lms::csv
