#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "errors.hpp"

namespace fpdsim {

enum class Polarity { Nmos, Pmos };

/// Level-1 square-law MOSFET. kp absorbs mobility, oxide capacitance and the
/// W/L ratio, so the saturation current is kp*(vgs-vth)^2 without an extra
/// 1/2 factor. vth is a positive magnitude for both polarities; the sign is
/// applied through `polarity`.
struct MosfetParams {
    Polarity polarity = Polarity::Nmos;
    double vth = 0.8;        // V
    double kp = 5e-5;        // A/V^2
    double lambda = 0.02;    // 1/V, channel-length modulation
    double sigma_rel = 0.0;  // relative mismatch sigma

    bool operator==(const MosfetParams&) const = default;
};

inline MosfetParams default_nmos() {
    return MosfetParams{Polarity::Nmos, 0.8, 5e-5, 0.02, 0.0};
}

inline MosfetParams default_pmos() {
    return MosfetParams{Polarity::Pmos, 0.9, 1.7e-5, 0.02, 0.0};
}

struct PhotodiodeParams {
    double responsivity = 1e-9;   // A/lux
    double dark_current = 1e-12;  // A
    double c_node = 1e-12;        // F, effective pixel node capacitance

    bool operator==(const PhotodiodeParams&) const = default;
};

/// Row-select switch. r_on enters only as a reported-voltage bookkeeping
/// term; the current path itself is ideal.
struct TftSwitch {
    double r_on = 0.0;    // ohm
    double i_leak = 0.0;  // A, off-state leakage
    bool gate_on = false;

    bool operator==(const TftSwitch&) const = default;
};

struct ComparatorSpec {
    double v_ref = 2.5;  // V
    static constexpr double v_high = 5.0;
    static constexpr double v_low = 0.0;
};

inline void validate(const MosfetParams& m, const std::string& who = "mosfet") {
    if (!(m.kp > 0.0) || !std::isfinite(m.kp))
        throw DomainError(who + ": kp must be finite and > 0");
    if (!(m.vth > 0.0) || !std::isfinite(m.vth))
        throw DomainError(who + ": vth must be finite and > 0");
    if (!(m.lambda >= 0.0) || !std::isfinite(m.lambda))
        throw DomainError(who + ": lambda must be finite and >= 0");
    if (!(m.sigma_rel >= 0.0) || !std::isfinite(m.sigma_rel))
        throw DomainError(who + ": sigma_rel must be finite and >= 0");
}

inline void validate(const PhotodiodeParams& pd) {
    if (!(pd.responsivity > 0.0) || !std::isfinite(pd.responsivity))
        throw DomainError("photodiode: responsivity must be finite and > 0");
    if (!(pd.dark_current >= 0.0) || !std::isfinite(pd.dark_current))
        throw DomainError("photodiode: dark_current must be finite and >= 0");
    if (!(pd.c_node > 0.0) || !std::isfinite(pd.c_node))
        throw DomainError("photodiode: c_node must be finite and > 0");
}

inline void validate(const TftSwitch& sw) {
    if (!(sw.r_on >= 0.0) || !std::isfinite(sw.r_on))
        throw DomainError("tft: r_on must be finite and >= 0");
    if (!(sw.i_leak >= 0.0) || !std::isfinite(sw.i_leak))
        throw DomainError("tft: i_leak must be finite and >= 0");
}

namespace detail {

/// Square law in the normalized (NMOS) frame: vgs, vds are magnitudes and
/// vds >= 0 is assumed. Continuous across the triode/saturation boundary.
inline double square_law(const MosfetParams& m, double vgs, double vds) {
    if (vgs <= m.vth) return 0.0;  // cutoff
    const double vov = vgs - m.vth;
    if (vds < vov)  // triode
        return m.kp * (2.0 * vov - vds) * vds * (1.0 + m.lambda * vds);
    // saturation
    return m.kp * vov * vov * (1.0 + m.lambda * vds);
}

struct SmallSignal {
    double id;   // A
    double gm;   // dId/dVgs
    double gds;  // dId/dVds
};

inline SmallSignal square_law_derivs(const MosfetParams& m, double vgs, double vds) {
    if (vgs <= m.vth) return {0.0, 0.0, 0.0};
    const double vov = vgs - m.vth;
    const double clm = 1.0 + m.lambda * vds;
    if (vds < vov) {
        const double id = m.kp * (2.0 * vov - vds) * vds * clm;
        const double gm = 2.0 * m.kp * vds * clm;
        const double gds =
            2.0 * m.kp * (vov - vds) * clm + m.kp * (2.0 * vov - vds) * vds * m.lambda;
        return {id, gm, gds};
    }
    const double id = m.kp * vov * vov * clm;
    return {id, 2.0 * m.kp * vov * clm, m.kp * vov * vov * m.lambda};
}

}  // namespace detail

/// Drain current magnitude. Voltages are given in the device's own sign
/// convention (PMOS vgs/vds are <= 0 in normal operation) and are mapped
/// internally to the normalized NMOS frame.
inline double drain_current(const MosfetParams& m, double vgs, double vds) {
    if (!std::isfinite(vgs) || !std::isfinite(vds))
        throw DomainError("drain_current: non-finite input voltage");
    if (m.polarity == Polarity::Pmos) {
        vgs = -vgs;
        vds = -vds;
    }
    if (vds < 0.0)
        throw DomainError("drain_current: vds must be >= 0 after polarity normalization");
    return detail::square_law(m, vgs, vds);
}

/// Gate-source magnitude of the diode-connected device carrying i_target,
/// i.e. the v with square_law(m, v, v) = i_target. Returns vth at zero
/// current. The closed-form lambda=0 inverse seeds a Newton polish of the
/// full cubic.
inline double diode_connected_vgs(const MosfetParams& m, double i_target) {
    if (!std::isfinite(i_target) || i_target < 0.0)
        throw DomainError("diode_connected_vgs: current must be finite and >= 0");
    if (i_target == 0.0) return m.vth;

    double v = m.vth + std::sqrt(i_target / m.kp);
    double f = 0.0;
    bool stagnated = false;
    for (int it = 0; it < 60; ++it) {
        const auto ss = detail::square_law_derivs(m, v, v);
        f = ss.id - i_target;
        if (std::abs(f) <= 1e-15 * i_target) return v;
        const double df = ss.gm + ss.gds;
        double vn = v - f / df;
        if (vn <= m.vth) vn = 0.5 * (v + m.vth);
        if (vn == v) {
            stagnated = true;
            break;
        }
        v = vn;
    }
    if (stagnated) {
        // The Newton step underflowed; settle on whichever neighbouring
        // representable voltage carries the smallest residual.
        for (double cand : {std::nextafter(v, m.vth), std::nextafter(v, v + 1.0)}) {
            if (cand <= m.vth) continue;
            const double fc = detail::square_law(m, cand, cand) - i_target;
            if (std::abs(fc) < std::abs(f)) {
                v = cand;
                f = fc;
            }
        }
    }
    if (std::abs(f) > 1e-9 * i_target)
        throw SolverError("diode_connected_vgs: no convergence", f);
    return v;
}

/// Linear photoresponse: responsivity * e + dark current.
inline double photocurrent(const PhotodiodeParams& pd, double e_lux) {
    if (!std::isfinite(e_lux) || e_lux < 0.0)
        throw DomainError("photocurrent: illuminance must be finite and >= 0");
    return pd.responsivity * e_lux + pd.dark_current;
}

/// 5 V strictly above v_ref, 0 V at or below it.
inline double comparator_out(const ComparatorSpec& c, double v_in) {
    return v_in > c.v_ref ? ComparatorSpec::v_high : ComparatorSpec::v_low;
}

/// Ideal current pass when the gate is driven; leakage floor otherwise.
inline double tft_pass(const TftSwitch& sw, double i_in) {
    return sw.gate_on ? i_in : sw.i_leak;
}

/// Copy of m with kp and vth multiplied by independent N(1, sigma_rel)
/// factors, truncated to +-4 sigma by redraw (factors are additionally
/// required to stay positive, which matters only for sigma_rel >= 0.25).
/// Deterministic in (m, seed); kp is drawn first, then vth.
inline MosfetParams apply_mismatch(const MosfetParams& m, std::uint64_t seed) {
    if (m.sigma_rel == 0.0) return m;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw_factor = [&] {
        for (;;) {
            const double z = gauss(rng);
            if (std::abs(z) > 4.0) continue;
            const double f = 1.0 + m.sigma_rel * z;
            if (f > 0.0) return f;
        }
    };
    MosfetParams out = m;
    out.kp *= draw_factor();
    out.vth *= draw_factor();
    return out;
}

}  // namespace fpdsim
