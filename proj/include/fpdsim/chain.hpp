#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "devices.hpp"
#include "errors.hpp"

namespace fpdsim {

struct SolverOptions {
    double abs_tol = 1e-12;  // A, cap on the accepted KCL residual
    double rel_tol = 1e-12;  // tightens the tolerance at small currents
    int max_iterations = 100;

    bool operator==(const SolverOptions&) const = default;
};

/// One current mirror: a diode-connected reference plus one or more output
/// devices sharing its gate. output_ratio is the design width ratio applied
/// to every output; the per-output params carry the mismatch realization.
struct MirrorSpec {
    MosfetParams reference;
    double output_ratio = 1.0;
    std::vector<MosfetParams> outputs;

    bool operator==(const MirrorSpec&) const = default;
};

/// The per-pixel readout cascade: a PMOS pixel mirror duplicating the
/// photocurrent into a line branch and a row branch, each re-mirrored by an
/// NMOS bus mirror into an ideal transimpedance stage (v = r_trans * i).
struct ReadoutChain {
    MirrorSpec pixel_mirror;  // PMOS; outputs[0] -> line branch, outputs[1] -> row branch
    MirrorSpec line_mirror;   // NMOS
    MirrorSpec row_mirror;    // NMOS
    double r_trans = 1e6;     // V/A
    double vdd = 5.0;         // V
    double c_node = 1e-12;    // F, pixel input node

    bool operator==(const ReadoutChain&) const = default;
};

struct ReadoutSample {
    double i_line = 0.0;  // A
    double i_row = 0.0;   // A
    double v_line = 0.0;  // V, r_trans * i_line
    double v_row = 0.0;   // V

    bool operator==(const ReadoutSample&) const = default;
};

struct TracePoint {
    double t = 0.0;      // s
    double i_out = 0.0;  // A
    double v_out = 0.0;  // V

    bool operator==(const TracePoint&) const = default;
};

struct Trace {
    double dt = 0.0;
    std::vector<TracePoint> samples;

    bool operator==(const Trace&) const = default;
};

inline ReadoutChain make_chain(const MosfetParams& nmos, const MosfetParams& pmos,
                               double r_trans = 1e6, double vdd = 5.0, double c_node = 1e-12,
                               double pixel_ratio = 1.0, double line_ratio = 1.0,
                               double row_ratio = 1.0) {
    MosfetParams p = pmos;
    p.polarity = Polarity::Pmos;
    MosfetParams n = nmos;
    n.polarity = Polarity::Nmos;
    ReadoutChain c;
    c.pixel_mirror = MirrorSpec{p, pixel_ratio, {p, p}};
    c.line_mirror = MirrorSpec{n, line_ratio, {n}};
    c.row_mirror = MirrorSpec{n, row_ratio, {n}};
    c.r_trans = r_trans;
    c.vdd = vdd;
    c.c_node = c_node;
    return c;
}

inline void validate(const MirrorSpec& s, const std::string& who) {
    validate(s.reference, who + " reference");
    if (!(s.output_ratio > 0.0) || !std::isfinite(s.output_ratio))
        throw DomainError(who + ": output_ratio must be finite and > 0");
    if (s.outputs.empty()) throw DomainError(who + ": needs at least one output device");
    for (const auto& o : s.outputs) {
        validate(o, who + " output");
        if (o.polarity != s.reference.polarity)
            throw DomainError(who + ": outputs must share the reference polarity");
    }
}

inline void validate(const ReadoutChain& c) {
    validate(c.pixel_mirror, "pixel mirror");
    validate(c.line_mirror, "line mirror");
    validate(c.row_mirror, "row mirror");
    if (c.pixel_mirror.reference.polarity != Polarity::Pmos)
        throw DomainError("chain: pixel mirror must be PMOS");
    if (c.pixel_mirror.outputs.size() < 2)
        throw DomainError("chain: pixel mirror needs a line and a row output");
    if (c.line_mirror.reference.polarity != Polarity::Nmos ||
        c.row_mirror.reference.polarity != Polarity::Nmos)
        throw DomainError("chain: bus mirrors must be NMOS");
    if (!(c.vdd > 0.0) || !std::isfinite(c.vdd))
        throw DomainError("chain: vdd must be finite and > 0");
    if (!(c.r_trans > 0.0) || !std::isfinite(c.r_trans))
        throw DomainError("chain: r_trans must be finite and > 0");
    if (!(c.c_node > 0.0) || !std::isfinite(c.c_node))
        throw DomainError("chain: c_node must be finite and > 0");
}

/// Neumaier-compensated accumulator for the binning node sums.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Kirchhoff sum of branch currents at a shared node.
inline double sum_at_node(std::span<const double> currents) {
    CompensatedSum acc;
    for (double i : currents) acc.add(i);
    return acc.value();
}

namespace detail {

inline std::string residual_str(double r) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", r);
    return buf;
}

/// Scalar damped Newton on [lo, hi]: full step first, halved while the
/// residual magnitude grows. f returns {value, derivative}. A requested
/// tolerance below the floating-point resolution of the residual,
/// |f'(x)| * ulp(x), is treated as met once no step can improve further.
template <class F>
inline double damped_newton(F&& f, double x0, double lo, double hi, double tol_f,
                            int max_iter, const char* what) {
    double x = std::clamp(x0, lo, hi);
    auto [fx, dfx] = f(x);
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fx) <= tol_f) return x;
        double step = dfx != 0.0 ? fx / dfx : (fx > 0.0 ? hi - lo : lo - hi);
        bool moved = false;
        for (int h = 0; h < 60; ++h) {
            const double cand = std::clamp(x - step, lo, hi);
            if (cand == x) break;
            const auto [fc, dfc] = f(cand);
            if (std::abs(fc) < std::abs(fx)) {
                x = cand;
                fx = fc;
                dfx = dfc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            const double resolution_limit = 8.0 * std::numeric_limits<double>::epsilon() *
                                            std::abs(dfx) * std::max(std::abs(x), 1e-3);
            if (std::abs(fx) <= std::max(tol_f, resolution_limit)) return x;
            throw SolverError(std::string(what) + ": stalled, residual " + residual_str(fx),
                              fx);
        }
    }
    if (std::abs(fx) <= tol_f) return x;
    throw SolverError(std::string(what) + ": no convergence, residual " + residual_str(fx), fx);
}

inline const MosfetParams& mirror_output(const MirrorSpec& s, std::size_t idx) {
    if (idx >= s.outputs.size())
        throw DomainError("mirror output index out of range");
    return s.outputs[idx];
}

/// Node voltage the ideal transimpedance stage pins the bus-mirror output
/// device to (mid-rail virtual input).
inline double amp_input_bias(const ReadoutChain& c) { return 0.5 * c.vdd; }

inline double kcl_tolerance(const SolverOptions& opts, double i_scale) {
    return std::min(opts.abs_tol, std::max(opts.rel_tol * i_scale, 1e-300));
}

struct BranchResult {
    double v_node;  // inter-mirror node voltage (NMOS diode bias)
    double i_out;   // bus mirror output current into the amplifier
};

/// One branch of the cascade for a given pixel-mirror gate bias vsg_pixel
/// (normalized frame). KCL at the inter-mirror node balances the PMOS output
/// against the diode-connected NMOS reference; the NMOS output device then
/// copies the branch current into the transimpedance stage.
inline BranchResult solve_branch(const ReadoutChain& chain, const MirrorSpec& bus,
                                 std::size_t pixel_output, double vsg_pixel, double i_scale,
                                 const SolverOptions& opts) {
    const MosfetParams& pmos_out = mirror_output(chain.pixel_mirror, pixel_output);
    const MosfetParams& nmos_ref = bus.reference;
    const MosfetParams& nmos_out = mirror_output(bus, 0);
    const double m_pix = chain.pixel_mirror.output_ratio;
    const double vdd = chain.vdd;
    const double bias = amp_input_bias(chain);

    // Dark branch: no current anywhere, node rests at the diode threshold.
    if (m_pix * square_law(pmos_out, vsg_pixel, vdd) == 0.0)
        return {nmos_ref.vth, 0.0};

    auto kcl = [&](double v) {
        const auto p = square_law_derivs(pmos_out, vsg_pixel, vdd - v);
        const auto d = square_law_derivs(nmos_ref, v, v);
        return std::pair{m_pix * p.id - d.id, -m_pix * p.gds - (d.gm + d.gds)};
    };

    const double i_ideal = m_pix * i_scale;
    const double v0 = diode_connected_vgs(nmos_ref, i_ideal);
    const double v_node = damped_newton(kcl, v0, 0.0, vdd, kcl_tolerance(opts, i_ideal),
                                        opts.max_iterations, "readout chain node");
    const double i_out = bus.output_ratio * square_law(nmos_out, v_node, bias);
    return {v_node, i_out};
}

}  // namespace detail

/// Largest photocurrent the pixel mirror reference can carry before its
/// diode bias hits the supply rail.
inline double max_photocurrent(const ReadoutChain& chain) {
    return detail::square_law(chain.pixel_mirror.reference, chain.vdd, chain.vdd);
}

/// DC mirror transfer: diode-connected reference operating point, then the
/// selected output device evaluated at the output node voltage v_out
/// (measured from ground; polarity handles the rail reference).
inline double mirror_dc(const MirrorSpec& spec, double i_in, double v_out, double vdd,
                        std::size_t output_index = 0) {
    if (!std::isfinite(i_in) || i_in < 0.0)
        throw DomainError("mirror_dc: input current must be finite and >= 0");
    if (!std::isfinite(v_out) || v_out < 0.0 || v_out > vdd)
        throw DomainError("mirror_dc: v_out must be within [0, vdd]");
    const double v_g = diode_connected_vgs(spec.reference, i_in);
    if (v_g > vdd)
        throw ComplianceError("mirror_dc: reference bias " + std::to_string(v_g) +
                              " V exceeds vdd");
    const MosfetParams& out = detail::mirror_output(spec, output_index);
    const double vds = out.polarity == Polarity::Pmos ? vdd - v_out : v_out;
    return spec.output_ratio * detail::square_law(out, v_g, vds);
}

/// DC solution of the full cascade for one photocurrent. Both pixel-mirror
/// outputs see the lambda-consistent reference gate voltage, so the ideal
/// (lambda = 0, matched, ratio 1) case reproduces i_photo exactly.
inline ReadoutSample solve_pixel_chain(const ReadoutChain& chain, double i_photo,
                                       const SolverOptions& opts = {}) {
    if (!std::isfinite(i_photo) || i_photo < 0.0)
        throw DomainError("solve_pixel_chain: photocurrent must be finite and >= 0");
    const double vsg = diode_connected_vgs(chain.pixel_mirror.reference, i_photo);
    if (vsg > chain.vdd)
        throw ComplianceError("solve_pixel_chain: pixel mirror bias " + std::to_string(vsg) +
                              " V exceeds vdd (photocurrent above compliance limit)");
    const auto line = detail::solve_branch(chain, chain.line_mirror, 0, vsg, i_photo, opts);
    const auto row = detail::solve_branch(chain, chain.row_mirror, 1, vsg, i_photo, opts);
    return {line.i_out, row.i_out, chain.r_trans * line.i_out, chain.r_trans * row.i_out};
}

/// Linearized time constant of the pixel input node at the given
/// illumination: c_node over the diode-connected reference conductance.
inline double estimate_time_constant(const ReadoutChain& chain, const PhotodiodeParams& pd,
                                     double lux) {
    const double i0 = photocurrent(pd, lux);
    const double v0 = diode_connected_vgs(chain.pixel_mirror.reference, i0);
    const auto ss = detail::square_law_derivs(chain.pixel_mirror.reference, v0, v0);
    const double g = ss.gm + ss.gds;
    if (!(g > 0.0))
        throw DomainError("estimate_time_constant: zero conductance at this bias");
    return chain.c_node / g;
}

/// Transient of the pixel input node, c_node * dw/dt = i_photo(t) - i_chain(w)
/// with w the normalized pixel-diode voltage, integrated by implicit Euler.
/// Each sample reports the line-branch output. The initial state is the DC
/// solution at stimulus(0); samples run t = 0, dt, ..., through t_end.
inline Trace simulate_transient(const ReadoutChain& chain, const PhotodiodeParams& pd,
                                const std::function<double(double)>& stimulus_lux, double dt,
                                double t_end, const SolverOptions& opts = {}) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw DomainError("simulate_transient: dt must be finite and > 0");
    if (!(t_end >= dt) || !std::isfinite(t_end))
        throw DomainError("simulate_transient: t_end must be >= dt");

    const MosfetParams& pix_ref = chain.pixel_mirror.reference;
    const double c = chain.c_node;
    const auto n_steps = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));

    Trace tr;
    tr.dt = dt;
    tr.samples.reserve(n_steps + 1);

    auto emit = [&](double t, double w) {
        const double i_scale = detail::square_law(pix_ref, w, w);
        const auto br = detail::solve_branch(chain, chain.line_mirror, 0, w, i_scale, opts);
        tr.samples.push_back({t, br.i_out, chain.r_trans * br.i_out});
    };

    double w = diode_connected_vgs(pix_ref, photocurrent(pd, stimulus_lux(0.0)));
    emit(0.0, w);

    for (std::size_t k = 1; k <= n_steps; ++k) {
        const double t_next = static_cast<double>(k) * dt;
        const double i_ph = photocurrent(pd, stimulus_lux(t_next));
        const double w_prev = w;
        auto implicit_step = [&](double u) {
            const auto d = detail::square_law_derivs(pix_ref, u, u);
            return std::pair{c * (u - w_prev) - dt * (i_ph - d.id), c + dt * (d.gm + d.gds)};
        };
        const double i_ref = std::max(i_ph, detail::square_law(pix_ref, w_prev, w_prev));
        const double tol = dt * std::max(opts.rel_tol * i_ref, 1e-300);
        try {
            w = detail::damped_newton(implicit_step, w_prev, 0.0, chain.vdd, tol,
                                      opts.max_iterations, "implicit Euler step");
        } catch (const SolverError& e) {
            throw SolverError("transient step failed at t = " + detail::residual_str(t_next) +
                                  " s: " + e.what(),
                              e.residual(), t_next);
        }
        emit(t_next, w);
    }
    return tr;
}

}  // namespace fpdsim
