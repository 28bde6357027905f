#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace survey {

// Parse failure with the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

// Minimal comma-separated table: header row plus data rows. No quoting; the
// formats used here never embed commas in fields. Trailing '\r' is stripped
// so CRLF files load cleanly.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; // source line per data row

    static std::vector<std::string> split_line(const std::string &line) {
        std::vector<std::string> fields;
        std::string current;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(current);
                current.clear();
            } else if (c != '\r') {
                current.push_back(c);
            }
        }
        fields.push_back(current);
        return fields;
    }

    static CsvTable read(std::istream &in) {
        CsvTable table;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") {
                continue;
            }
            auto fields = split_line(line);
            if (table.header.empty()) {
                table.header = std::move(fields);
            } else {
                if (fields.size() != table.header.size()) {
                    throw ParseError(line_no, "expected " + std::to_string(table.header.size()) +
                                                  " fields, got " + std::to_string(fields.size()));
                }
                table.rows.push_back(std::move(fields));
                table.row_lines.push_back(line_no);
            }
        }
        if (table.header.empty()) {
            throw ParseError(0, "empty input: no header row");
        }
        return table;
    }

    // Index of a required column; throws a schema error if missing.
    [[nodiscard]] std::size_t column(const std::string &name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        throw ParseError(1, "missing required column '" + name + "'");
    }
};

} // namespace survey
