#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "chain.hpp"
#include "errors.hpp"
#include "panel.hpp"
#include "text_util.hpp"
#include "validation.hpp"

namespace fpdsim {

namespace detail {

/// Write-to-temp plus atomic rename, so error paths never leave a partial
/// output file behind.
inline void atomic_write(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing: " + std::strerror(errno));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            const std::string cause = std::strerror(errno);
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("failed writing '" + tmp + "': " + cause);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ec2;
        std::filesystem::remove(tmp, ec2);
        throw IoError("failed renaming '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

}  // namespace detail

/// ASCII PGM, maxval 2^bits - 1, one row of codes per raster line.
inline std::string frame_pgm_string(const Frame& f) {
    std::string out = "P2\n";
    out += std::to_string(f.width) + " " + std::to_string(f.height) + "\n";
    out += std::to_string((1u << f.adc_bits) - 1u) + "\n";
    for (int r = 0; r < f.height; ++r) {
        for (int c = 0; c < f.width; ++c) {
            if (c > 0) out += ' ';
            out += std::to_string(f.codes[static_cast<std::size_t>(r) * f.width + c]);
        }
        out += '\n';
    }
    return out;
}

/// Per-cell CSV including the pre-quantization current and voltage.
inline std::string frame_csv_string(const Frame& f) {
    std::string out = "row,col,current,voltage,code\n";
    for (int r = 0; r < f.height; ++r)
        for (int c = 0; c < f.width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * f.width + c;
            out += std::to_string(r) + "," + std::to_string(c) + "," +
                   detail::format_double(f.currents[i]) + "," +
                   detail::format_double(f.voltages[i]) + "," + std::to_string(f.codes[i]) + "\n";
        }
    return out;
}

inline std::string trace_csv_string(const Trace& tr) {
    std::string out = "t,i_out,v_out\n";
    for (const auto& s : tr.samples)
        out += detail::format_double(s.t) + "," + detail::format_double(s.i_out) + "," +
               detail::format_double(s.v_out) + "\n";
    return out;
}

inline std::string led_csv_string(const LedMatrixState& led) {
    std::string out;
    for (int r = 0; r < led.rows; ++r) {
        for (int c = 0; c < led.cols; ++c) {
            if (c > 0) out += ',';
            out += led.is_lit(r, c) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

inline void write_frame_pgm(const std::string& path, const Frame& f) {
    detail::atomic_write(path, frame_pgm_string(f));
}

inline void write_frame_csv(const std::string& path, const Frame& f) {
    detail::atomic_write(path, frame_csv_string(f));
}

/// Dispatch on extension: .pgm writes the image form, anything else the CSV.
inline void write_frame(const std::string& path, const Frame& f) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
        write_frame_pgm(path, f);
    else
        write_frame_csv(path, f);
}

inline void write_trace(const std::string& path, const Trace& tr) {
    detail::atomic_write(path, trace_csv_string(tr));
}

inline void write_led(const std::string& path, const LedMatrixState& led) {
    detail::atomic_write(path, led_csv_string(led));
}

}  // namespace fpdsim
