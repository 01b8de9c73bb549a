#pragma once

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "scene.hpp"
#include "text_util.hpp"

namespace fpdsim {

namespace detail {

inline double parse_scene_number(std::string_view text, const std::string& where) {
    double value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw DomainError("scene: malformed number '" + std::string(text) + "' " + where);
    return value;
}

inline Scene parse_scene_csv(std::string_view text) {
    Scene s;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;

        std::vector<double> row;
        std::size_t cell_pos = 0;
        while (cell_pos <= line.size()) {
            const auto comma = line.find(',', cell_pos);
            std::string_view cell =
                line.substr(cell_pos, comma == std::string_view::npos ? line.size() - cell_pos
                                                                      : comma - cell_pos);
            cell_pos = comma == std::string_view::npos ? line.size() + 1 : comma + 1;
            cell = trim(cell);
            row.push_back(parse_scene_number(cell, "on line " + std::to_string(line_no)));
        }

        if (s.cols == 0) s.cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != s.cols)
            throw DomainError("scene: ragged row on line " + std::to_string(line_no) + " (" +
                              std::to_string(row.size()) + " values, expected " +
                              std::to_string(s.cols) + ")");
        s.lux.insert(s.lux.end(), row.begin(), row.end());
        ++s.rows;
    }
    if (s.rows == 0) throw DomainError("scene: no data rows");
    validate(s);
    return s;
}

class PgmScanner {
public:
    explicit PgmScanner(std::string_view text) : text_(text) {}

    /// Next whitespace-delimited token, skipping '#' comments to end of line.
    std::string_view next_token() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= text_.size()) throw DomainError("scene: truncated PGM header");
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    int next_int(const std::string& what) {
        const auto tok = next_token();
        int v{};
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size())
            throw DomainError("scene: malformed PGM " + what + " '" + std::string(tok) + "'");
        return v;
    }

    /// Position just past the single whitespace byte that ends the header.
    std::size_t binary_start() const { return pos_ + 1; }

    std::string_view text() const { return text_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

inline Scene parse_scene_pgm(std::string_view text, double lux_max) {
    PgmScanner sc(text);
    const auto magic = sc.next_token();
    const bool binary = magic == "P5";
    if (!binary && magic != "P2") throw DomainError("scene: unsupported PGM magic");
    const int width = sc.next_int("width");
    const int height = sc.next_int("height");
    const int maxval = sc.next_int("maxval");
    if (width < 1 || height < 1) throw DomainError("scene: PGM dimensions must be >= 1");
    if (maxval < 1 || maxval > 65535) throw DomainError("scene: PGM maxval must be in [1, 65535]");

    Scene s;
    s.rows = height;
    s.cols = width;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    s.lux.reserve(count);
    const double scale = lux_max / static_cast<double>(maxval);

    if (binary) {
        const auto bytes_per = static_cast<std::size_t>(maxval > 255 ? 2 : 1);
        std::size_t pos = sc.binary_start();
        if (pos + count * bytes_per > text.size())
            throw DomainError("scene: truncated PGM pixel data");
        for (std::size_t i = 0; i < count; ++i) {
            unsigned g = static_cast<unsigned char>(text[pos++]);
            if (bytes_per == 2) g = (g << 8) | static_cast<unsigned char>(text[pos++]);
            if (g > static_cast<unsigned>(maxval))
                throw DomainError("scene: PGM sample exceeds maxval");
            s.lux.push_back(static_cast<double>(g) * scale);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const int g = sc.next_int("sample");
            if (g < 0 || g > maxval) throw DomainError("scene: PGM sample out of range");
            s.lux.push_back(static_cast<double>(g) * scale);
        }
    }
    validate(s);
    return s;
}

}  // namespace detail

/// Parse scene text: a PGM (P2/P5, grays mapped linearly onto [0, lux_max])
/// or a comma-separated grid of absolute lux values.
inline Scene parse_scene(std::string_view text, double lux_max) {
    const auto head = detail::trim(text.substr(0, text.find('\n')));
    if (head.size() >= 2 && head[0] == 'P' && (head[1] == '2' || head[1] == '5'))
        return detail::parse_scene_pgm(text, lux_max);
    return detail::parse_scene_csv(text);
}

inline Scene load_scene(const std::string& path, double lux_max) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading scene file '" + path + "'");
    return parse_scene(buf.str(), lux_max);
}

}  // namespace fpdsim
