#pragma once

#include <cmath>

#include "errors.hpp"

namespace fpdsim {

enum class WaveformKind { Constant, PulseTrain };

/// Illumination waveform. A pulse train sits at `baseline` at t = 0 and
/// drives `baseline + amplitude` for the first `duty` fraction of every
/// period starting at t = 0+, so duty = 1 degenerates to a step.
struct Stimulus {
    WaveformKind kind = WaveformKind::Constant;
    double amplitude = 0.0;  // lux
    double period = 0.0;     // s, pulse trains only
    double duty = 1.0;       // fraction in [0, 1]
    double baseline = 0.0;   // lux

    double lux_at(double t) const {
        if (kind == WaveformKind::Constant) return baseline + amplitude;
        double phase = std::fmod(t, period);
        // Sample times that land a rounding error short of a period boundary
        // belong to the next cycle, so the first sample of every period sees
        // the same on/off decision.
        if (period - phase <= 1e-12 * period) phase = 0.0;
        const bool on = t > 0.0 && phase < duty * period;
        return on ? baseline + amplitude : baseline;
    }

    bool operator==(const Stimulus&) const = default;
};

inline void validate(const Stimulus& s) {
    if (!(s.amplitude >= 0.0) || !std::isfinite(s.amplitude))
        throw DomainError("stimulus: amplitude must be finite and >= 0");
    if (!(s.baseline >= 0.0) || !std::isfinite(s.baseline))
        throw DomainError("stimulus: baseline must be finite and >= 0");
    if (!(s.duty >= 0.0 && s.duty <= 1.0))
        throw DomainError("stimulus: duty must be in [0, 1]");
    if (s.kind == WaveformKind::PulseTrain && !(s.period > 0.0))
        throw DomainError("stimulus: pulse train period must be > 0");
}

}  // namespace fpdsim
