#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chain.hpp"
#include "devices.hpp"
#include "errors.hpp"
#include "scene.hpp"
#include "seed.hpp"

namespace fpdsim {

struct PanelConfig {
    int rows = 4;
    int cols = 4;
    double frame_time = 1e-3;  // s
    ReadoutChain chain = make_chain(default_nmos(), default_pmos());
    PhotodiodeParams photodiode;
    TftSwitch tft;
    std::uint64_t seed = 0;
    int adc_bits = 12;
    double v_full_scale = 5.0;  // V
    double lux_max = 1.0;       // full-scale mapping for PGM scenes
    SolverOptions solver;

    bool operator==(const PanelConfig&) const = default;
};

inline void validate(const PanelConfig& cfg) {
    if (cfg.rows < 1) throw ConfigError("config: rows must be >= 1", 0, "rows");
    if (cfg.cols < 1) throw ConfigError("config: cols must be >= 1", 0, "cols");
    if (!(cfg.frame_time > 0.0) || !std::isfinite(cfg.frame_time))
        throw ConfigError("config: frame_time must be finite and > 0", 0, "frame_time");
    if (cfg.adc_bits < 1 || cfg.adc_bits > 24)
        throw ConfigError("config: adc_bits must be in [1, 24]", 0, "adc_bits");
    if (!(cfg.v_full_scale > 0.0) || !std::isfinite(cfg.v_full_scale))
        throw ConfigError("config: v_full_scale must be finite and > 0", 0, "v_full_scale");
    if (!(cfg.lux_max > 0.0) || !std::isfinite(cfg.lux_max))
        throw ConfigError("config: lux_max must be finite and > 0", 0, "lux_max");
    if (!(cfg.solver.abs_tol > 0.0))
        throw ConfigError("config: abs_tol must be > 0", 0, "abs_tol");
    if (!(cfg.solver.rel_tol > 0.0))
        throw ConfigError("config: rel_tol must be > 0", 0, "rel_tol");
    if (cfg.solver.max_iterations < 1)
        throw ConfigError("config: max_iterations must be >= 1", 0, "max_iterations");
    try {
        validate(cfg.chain);
        validate(cfg.photodiode);
        validate(cfg.tft);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

/// Immutable panel: one readout chain per pixel, mismatch already applied.
/// The in-pixel mirror draws its mismatch from (row, col); the bus mirrors
/// draw theirs from the line index (row) and row-bus index (col) alone,
/// since those devices are shared along their bus.
class Panel {
public:
    explicit Panel(PanelConfig cfg) : cfg_(std::move(cfg)) {
        validate(cfg_);
        chains_.reserve(static_cast<std::size_t>(cfg_.rows) * cfg_.cols);
        for (int r = 0; r < cfg_.rows; ++r)
            for (int c = 0; c < cfg_.cols; ++c) chains_.push_back(build_chain(r, c));
    }

    const PanelConfig& config() const { return cfg_; }
    int rows() const { return cfg_.rows; }
    int cols() const { return cfg_.cols; }

    const ReadoutChain& chain(int r, int c) const {
        return chains_[static_cast<std::size_t>(r) * cfg_.cols + c];
    }

    bool operator==(const Panel& other) const {
        return cfg_ == other.cfg_ && chains_ == other.chains_;
    }

private:
    enum DeviceTag : std::uint32_t {
        kPixelRef = 1,
        kPixelLineOut = 2,
        kPixelRowOut = 3,
        kLineRef = 4,
        kLineOut = 5,
        kRowRef = 6,
        kRowOut = 7,
    };

    ReadoutChain build_chain(int r, int c) const {
        const auto ur = static_cast<std::uint32_t>(r);
        const auto uc = static_cast<std::uint32_t>(c);
        const std::uint64_t s = cfg_.seed;
        ReadoutChain ch = cfg_.chain;
        ch.c_node = cfg_.photodiode.c_node;
        ch.pixel_mirror.reference =
            apply_mismatch(ch.pixel_mirror.reference, coord_seed(s, kPixelRef, ur, uc));
        ch.pixel_mirror.outputs[0] =
            apply_mismatch(ch.pixel_mirror.outputs[0], coord_seed(s, kPixelLineOut, ur, uc));
        ch.pixel_mirror.outputs[1] =
            apply_mismatch(ch.pixel_mirror.outputs[1], coord_seed(s, kPixelRowOut, ur, uc));
        ch.line_mirror.reference =
            apply_mismatch(ch.line_mirror.reference, coord_seed(s, kLineRef, ur, 0));
        ch.line_mirror.outputs[0] =
            apply_mismatch(ch.line_mirror.outputs[0], coord_seed(s, kLineOut, ur, 0));
        ch.row_mirror.reference =
            apply_mismatch(ch.row_mirror.reference, coord_seed(s, kRowRef, uc, 0));
        ch.row_mirror.outputs[0] =
            apply_mismatch(ch.row_mirror.outputs[0], coord_seed(s, kRowOut, uc, 0));
        return ch;
    }

    PanelConfig cfg_;
    std::vector<ReadoutChain> chains_;
};

inline Panel build_panel(const PanelConfig& cfg) { return Panel(cfg); }

/// Disjoint cover of the panel into summation groups sharing one node.
struct BinPattern {
    struct Group {
        std::vector<std::pair<int, int>> members;  // (row, col)
        bool operator==(const Group&) const = default;
    };
    std::vector<Group> groups;
    int out_rows = 1;  // output grid shape; 1 x n_groups for irregular patterns
    int out_cols = 0;
    std::string id;

    bool operator==(const BinPattern&) const = default;
};

inline BinPattern singleton_pattern(int rows, int cols) {
    BinPattern p;
    p.out_rows = rows;
    p.out_cols = cols;
    p.id = "pixel";
    p.groups.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p.groups.push_back({{{r, c}}});
    return p;
}

inline BinPattern block_pattern(int rows, int cols, int block_rows, int block_cols) {
    if (block_rows < 1 || block_cols < 1)
        throw DomainError("block_pattern: block dimensions must be >= 1");
    BinPattern p;
    p.out_rows = (rows + block_rows - 1) / block_rows;
    p.out_cols = (cols + block_cols - 1) / block_cols;
    p.id = "block_" + std::to_string(block_rows) + "x" + std::to_string(block_cols);
    for (int br = 0; br < p.out_rows; ++br)
        for (int bc = 0; bc < p.out_cols; ++bc) {
            BinPattern::Group g;
            for (int r = br * block_rows; r < std::min(rows, (br + 1) * block_rows); ++r)
                for (int c = bc * block_cols; c < std::min(cols, (bc + 1) * block_cols); ++c)
                    g.members.push_back({r, c});
            p.groups.push_back(std::move(g));
        }
    return p;
}

inline BinPattern whole_panel_pattern(int rows, int cols) {
    BinPattern p;
    p.out_rows = 1;
    p.out_cols = 1;
    p.id = "whole";
    BinPattern::Group g;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) g.members.push_back({r, c});
    p.groups.push_back(std::move(g));
    return p;
}

inline void validate_pattern(const BinPattern& p, int rows, int cols) {
    std::vector<int> owner(static_cast<std::size_t>(rows) * cols, -1);
    auto coord = [](int r, int c) {
        return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
    };
    for (std::size_t g = 0; g < p.groups.size(); ++g)
        for (const auto& [r, c] : p.groups[g].members) {
            if (r < 0 || r >= rows || c < 0 || c >= cols)
                throw PatternError("bin pattern: coordinate out of range " + coord(r, c));
            auto& slot = owner[static_cast<std::size_t>(r) * cols + c];
            if (slot >= 0)
                throw PatternError("bin pattern: coordinate " + coord(r, c) +
                                   " appears in groups " + std::to_string(slot) + " and " +
                                   std::to_string(g));
            slot = static_cast<int>(g);
        }
    std::string missing;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (owner[static_cast<std::size_t>(r) * cols + c] < 0) {
                if (!missing.empty()) missing += ", ";
                missing += coord(r, c);
            }
    if (!missing.empty())
        throw PatternError("bin pattern: uncovered coordinates " + missing);
    if (p.out_rows * p.out_cols != static_cast<int>(p.groups.size()))
        throw PatternError("bin pattern: output grid shape does not match group count");
}

struct Frame {
    int height = 0;
    int width = 0;
    std::vector<std::uint32_t> codes;  // height*width, row-major
    std::vector<double> currents;      // pre-quantization amperes
    std::vector<double> voltages;      // pre-quantization volts
    double frame_time = 0.0;
    int adc_bits = 0;
    std::string bin_pattern_id;
    std::uint64_t seed = 0;

    bool operator==(const Frame&) const = default;
};

struct ScanEvent {
    double t_select = 0.0;  // s
    int row = 0;

    bool operator==(const ScanEvent&) const = default;
};

struct ScanLog {
    std::vector<ScanEvent> events;

    bool operator==(const ScanLog&) const = default;
};

/// clamp(floor(v / v_full * 2^bits), 0, 2^bits - 1)
inline std::uint32_t adc_quantize(double v, int bits, double v_full) {
    if (bits < 1 || bits > 24) throw DomainError("adc_quantize: bits must be in [1, 24]");
    if (!(v_full > 0.0) || !std::isfinite(v_full))
        throw DomainError("adc_quantize: v_full must be finite and > 0");
    const std::uint32_t top = (1u << bits) - 1u;
    if (!(v > 0.0)) return 0;  // negatives (and NaN) clamp to code 0
    const double q = std::floor(v / v_full * static_cast<double>(1u << bits));
    return q > static_cast<double>(top) ? top : static_cast<std::uint32_t>(q);
}

/// Charge bookkeeping for the integrating-detector view: the per-pixel
/// integration window equals the frame time.
inline double integrated_charge(double i, double frame_time) { return i * frame_time; }

namespace detail {

inline void check_scene(const Panel& panel, const Scene& scene) {
    validate(scene);
    if (scene.rows != panel.rows() || scene.cols != panel.cols())
        throw DomainError("scene dimensions " + std::to_string(scene.rows) + "x" +
                          std::to_string(scene.cols) + " do not match panel " +
                          std::to_string(panel.rows()) + "x" + std::to_string(panel.cols()));
}

/// Reported output voltage; TFT r_on enters as a series-drop bookkeeping term.
inline double reported_voltage(const Panel& panel, double i) {
    return panel.config().chain.r_trans * i - i * panel.config().tft.r_on;
}

}  // namespace detail

/// DC solution of every pixel chain against the scene (time t for scenes
/// with a modulated mask). Row-major order.
inline std::vector<ReadoutSample> solve_all(const Panel& panel, const Scene& scene,
                                            double t = 0.0) {
    detail::check_scene(panel, scene);
    const auto& cfg = panel.config();
    TftSwitch selected = cfg.tft;
    selected.gate_on = true;
    std::vector<ReadoutSample> out;
    out.reserve(static_cast<std::size_t>(panel.rows()) * panel.cols());
    for (int r = 0; r < panel.rows(); ++r)
        for (int c = 0; c < panel.cols(); ++c) {
            const double i_photo = photocurrent(cfg.photodiode, scene.lux_at(r, c, t));
            ReadoutSample s = solve_pixel_chain(panel.chain(r, c), i_photo, cfg.solver);
            s.i_line = tft_pass(selected, s.i_line);
            s.i_row = tft_pass(selected, s.i_row);
            out.push_back(s);
        }
    return out;
}

/// Per-pixel line-branch currents (the quantity the frame reports),
/// row-major. Exposed separately so binning equivalence can be checked
/// against individually solved pixels.
inline std::vector<double> scan_currents(const Panel& panel, const Scene& scene) {
    std::vector<double> currents;
    const auto samples = solve_all(panel, scene);
    currents.reserve(samples.size());
    for (const auto& s : samples) currents.push_back(s.i_line);
    return currents;
}

/// Progressive full-resolution readout, one line at a time from the top.
/// The detector integrates continuously, so every pixel reports its full
/// frame-time value; the scan order only sets the select timestamps.
inline std::pair<Frame, ScanLog> scan_frame(const Panel& panel, const Scene& scene) {
    const auto& cfg = panel.config();
    const auto currents = scan_currents(panel, scene);

    Frame f;
    f.height = panel.rows();
    f.width = panel.cols();
    f.frame_time = cfg.frame_time;
    f.adc_bits = cfg.adc_bits;
    f.bin_pattern_id = "pixel";
    f.seed = cfg.seed;
    f.currents = currents;
    f.voltages.reserve(currents.size());
    f.codes.reserve(currents.size());

    ScanLog log;
    const double row_period = cfg.frame_time / cfg.rows;
    for (int r = 0; r < panel.rows(); ++r) {
        log.events.push_back({r * row_period, r});
        for (int c = 0; c < panel.cols(); ++c) {
            const double i = currents[static_cast<std::size_t>(r) * panel.cols() + c];
            const double v = detail::reported_voltage(panel, i);
            f.voltages.push_back(v);
            f.codes.push_back(adc_quantize(v, cfg.adc_bits, cfg.v_full_scale));
        }
    }
    return {std::move(f), std::move(log)};
}

namespace detail {

enum class BinMode { Sum, Average };

inline Frame grouped_read(const Panel& panel, const Scene& scene, const BinPattern& pattern,
                          BinMode mode) {
    validate_pattern(pattern, panel.rows(), panel.cols());
    const auto& cfg = panel.config();
    const auto currents = scan_currents(panel, scene);

    Frame f;
    f.height = pattern.out_rows;
    f.width = pattern.out_cols;
    f.frame_time = cfg.frame_time;
    f.adc_bits = cfg.adc_bits;
    f.bin_pattern_id = pattern.id;
    f.seed = cfg.seed;
    f.codes.reserve(pattern.groups.size());
    f.currents.reserve(pattern.groups.size());
    f.voltages.reserve(pattern.groups.size());

    for (const auto& g : pattern.groups) {
        CompensatedSum node;
        for (const auto& [r, c] : g.members)
            node.add(currents[static_cast<std::size_t>(r) * panel.cols() + c]);
        double i = node.value();
        if (mode == BinMode::Average && !g.members.empty())
            i /= static_cast<double>(g.members.size());
        const double v = reported_voltage(panel, i);
        f.currents.push_back(i);
        f.voltages.push_back(v);
        f.codes.push_back(adc_quantize(v, cfg.adc_bits, cfg.v_full_scale));
    }
    return f;
}

}  // namespace detail

/// Binned readout: one value per group, the Kirchhoff sum of the member
/// chain currents at the shared node, taken in a single reading.
inline Frame binned_read(const Panel& panel, const Scene& scene, const BinPattern& pattern) {
    return detail::grouped_read(panel, scene, pattern, detail::BinMode::Sum);
}

/// Resolution reduction: the summed group current divided by the group size
/// (average of the member intensities), then quantized.
inline Frame resolution_reduce(const Panel& panel, const Scene& scene,
                               const BinPattern& pattern) {
    return detail::grouped_read(panel, scene, pattern, detail::BinMode::Average);
}

}  // namespace fpdsim
