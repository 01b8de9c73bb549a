#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "chain.hpp"
#include "panel.hpp"
#include "stimulus.hpp"

namespace fpdsim {

/// Comparator/AND readout of the LED validation matrix: an LED lights when
/// both its line comparator and its row comparator are high.
struct LedMatrixState {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> lit;  // rows*cols, row-major
    std::vector<double> line_out;   // size rows, each exactly 0 or 5 V
    std::vector<double> row_out;    // size cols

    bool is_lit(int r, int c) const {
        return lit[static_cast<std::size_t>(r) * cols + c] != 0;
    }

    bool operator==(const LedMatrixState&) const = default;
};

/// Solve every chain, aggregate line-branch currents per line and row-branch
/// currents per row bus, threshold both against v_ref, and AND the results.
inline LedMatrixState led_test(const Panel& panel, const Scene& scene, double v_ref) {
    const auto samples = solve_all(panel, scene);
    const auto& cfg = panel.config();
    const int rows = panel.rows();
    const int cols = panel.cols();

    std::vector<CompensatedSum> line_sum(rows);
    std::vector<CompensatedSum> row_sum(cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const auto& s = samples[static_cast<std::size_t>(r) * cols + c];
            line_sum[r].add(s.i_line);
            row_sum[c].add(s.i_row);
        }

    const ComparatorSpec cmp{v_ref};
    LedMatrixState state;
    state.rows = rows;
    state.cols = cols;
    state.line_out.reserve(rows);
    state.row_out.reserve(cols);
    for (int r = 0; r < rows; ++r)
        state.line_out.push_back(comparator_out(cmp, cfg.chain.r_trans * line_sum[r].value()));
    for (int c = 0; c < cols; ++c)
        state.row_out.push_back(comparator_out(cmp, cfg.chain.r_trans * row_sum[c].value()));

    state.lit.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            state.lit.push_back(state.line_out[r] == ComparatorSpec::v_high &&
                                        state.row_out[c] == ComparatorSpec::v_high
                                    ? 1
                                    : 0);
    return state;
}

/// Dynamic response of a single chain to a stimulus waveform. The default
/// reproduction scenario pulses at 0.4 lux.
inline Trace pulsed_response(const ReadoutChain& chain, const PhotodiodeParams& pd,
                             const Stimulus& stim, double dt, double t_end,
                             const SolverOptions& opts = {}) {
    validate(stim);
    return simulate_transient(
        chain, pd, [&stim](double t) { return stim.lux_at(t); }, dt, t_end, opts);
}

/// Dynamic response with several pixels driven together: each listed chain
/// is simulated independently and the traces meet at the ideal summing node.
inline Trace multi_pixel_response(const Panel& panel,
                                  const std::vector<std::pair<int, int>>& pixels,
                                  const Stimulus& stim, double dt, double t_end) {
    if (pixels.empty()) throw DomainError("multi_pixel_response: pixel set is empty");
    std::set<std::pair<int, int>> seen;
    for (const auto& [r, c] : pixels) {
        if (r < 0 || r >= panel.rows() || c < 0 || c >= panel.cols())
            throw DomainError("multi_pixel_response: pixel (" + std::to_string(r) + "," +
                              std::to_string(c) + ") out of range");
        if (!seen.insert({r, c}).second)
            throw DomainError("multi_pixel_response: duplicate pixel (" + std::to_string(r) +
                              "," + std::to_string(c) + ")");
    }

    const auto& cfg = panel.config();
    std::vector<Trace> traces;
    traces.reserve(pixels.size());
    for (const auto& [r, c] : pixels)
        traces.push_back(
            pulsed_response(panel.chain(r, c), cfg.photodiode, stim, dt, t_end, cfg.solver));

    Trace out;
    out.dt = dt;
    const std::size_t n = traces.front().samples.size();
    out.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        CompensatedSum node;
        for (const auto& tr : traces) node.add(tr.samples[k].i_out);
        const double i = node.value();
        out.samples.push_back({traces.front().samples[k].t, i, cfg.chain.r_trans * i});
    }
    return out;
}

}  // namespace fpdsim
