#pragma once

// Minimal delimiter-separated-values reader shared by the table loader, the
// power-trace loader, and the results-matrix loader. Handles quoted fields
// with doubled-quote escapes and tolerates trailing carriage returns.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "imlp/common.hpp"

namespace imlp {

inline std::vector<std::string> split_delimited_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

/// All rows of a delimited text file, including the header row.
inline std::vector<std::vector<std::string>> read_delimited_file(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;  // ignore trailing newline
        rows.push_back(split_delimited_line(line, delimiter));
    }
    return rows;
}

inline double parse_double(const std::string& s, const std::string& context) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw data_error(context + ": cannot parse number from '" + s + "'");
    }
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos != s.size()) throw data_error(context + ": trailing characters in number '" + s + "'");
    return v;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << content;
}

}  // namespace imlp
