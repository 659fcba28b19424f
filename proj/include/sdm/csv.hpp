// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdm/common.hpp"

namespace sdm::csv {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

/// Splits on commas; fields are trimmed and unquoted. No embedded delimiters.
inline void split(std::string_view line, std::vector<std::string_view>& out, char delim = ',') {
    out.clear();
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline std::string lower(std::string_view s) {
    std::string r(s);
    for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return r;
}

/// Iterates over lines of an in-memory buffer; tracks 1-based line numbers.
class LineReader {
public:
    explicit LineReader(std::string_view buf) : buf_(buf) {
        if (buf_.size() >= 3 && buf_.substr(0, 3) == "\xEF\xBB\xBF") buf_.remove_prefix(3);
    }

    bool next(std::string_view& line) {
        if (pos_ >= buf_.size()) return false;
        const std::size_t nl = buf_.find('\n', pos_);
        const std::size_t end = nl == std::string_view::npos ? buf_.size() : nl;
        line = buf_.substr(pos_, end - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = end + 1;
        ++line_no_;
        return true;
    }

    std::size_t line_number() const { return line_no_; }

private:
    std::string_view buf_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
};

template <class Int>
bool parse_int(std::string_view s, Int& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

/// Integer id; also accepts integral decimals such as "1234.0" written by dataframe exports.
inline bool parse_id(std::string_view s, std::int64_t& out) {
    if (parse_int(s, out)) return true;
    double d;
    if (!parse_double(s, d) || d != std::floor(d) || std::fabs(d) > 9.0e15) return false;
    out = static_cast<std::int64_t>(d);
    return true;
}

/// Error message prefix "path:line: ".
inline std::string where(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line) + ": ";
}

}  // namespace sdm::csv
