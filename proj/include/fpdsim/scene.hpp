#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "stimulus.hpp"

namespace fpdsim {

/// Illuminance map, optionally with a waveform attached to a subset of
/// pixels. Pixels flagged in `modulated` follow the stimulus waveform
/// (including its own baseline) instead of their static value.
struct Scene {
    int rows = 0;
    int cols = 0;
    std::vector<double> lux;                 // rows*cols, row-major
    std::optional<Stimulus> modulation;
    std::vector<std::uint8_t> modulated;     // rows*cols mask; empty = all static

    static Scene uniform(int rows, int cols, double level) {
        Scene s;
        s.rows = rows;
        s.cols = cols;
        s.lux.assign(static_cast<std::size_t>(rows) * cols, level);
        return s;
    }

    double lux_at(int r, int c, double t = 0.0) const {
        const std::size_t idx = static_cast<std::size_t>(r) * cols + c;
        if (modulation && !modulated.empty() && modulated[idx]) return modulation->lux_at(t);
        return lux[idx];
    }

    bool operator==(const Scene&) const = default;
};

inline void validate(const Scene& s) {
    if (s.rows < 1 || s.cols < 1) throw DomainError("scene: dimensions must be >= 1");
    if (s.lux.size() != static_cast<std::size_t>(s.rows) * s.cols)
        throw DomainError("scene: value count does not match dimensions");
    for (std::size_t i = 0; i < s.lux.size(); ++i)
        if (!(s.lux[i] >= 0.0))
            throw DomainError("scene: negative or non-finite illuminance at index " +
                              std::to_string(i));
    if (!s.modulated.empty() && s.modulated.size() != s.lux.size())
        throw DomainError("scene: modulation mask size mismatch");
    if (s.modulation) validate(*s.modulation);
}

}  // namespace fpdsim
