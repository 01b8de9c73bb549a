#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "panel.hpp"
#include "text_util.hpp"

namespace fpdsim {

namespace detail {

template <class T>
inline T parse_number(std::string_view text, int line, const std::string& key) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("config line " + std::to_string(line) + ": malformed number for key '" +
                              key + "': '" + std::string(text) + "'",
                          line, key);
    return value;
}

struct RawEntry {
    std::string value;
    int line = 0;
};

/// Raw sectioned key=value view of a config document.
using RawDocument = std::map<std::string, RawEntry>;  // "section.key" -> entry

inline RawDocument scan_config(std::string_view text) {
    RawDocument doc;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                      ": unterminated section header",
                                  line_no);
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section name",
                                  line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'",
                              line_no);
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key", line_no);
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                                  "' outside any section",
                              line_no, key);
        const std::string full = section + "." + key;
        if (auto it = doc.find(full); it != doc.end())
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                                  full + "' (first set on line " +
                                  std::to_string(it->second.line) + ")",
                              line_no, full);
        doc[full] = {value, line_no};
    }
    return doc;
}

class ConfigBinder {
public:
    explicit ConfigBinder(RawDocument doc) : doc_(std::move(doc)) {}

    template <class T>
    void bind(const std::string& full_key, T& target) {
        auto it = doc_.find(full_key);
        if (it == doc_.end()) return;
        target = parse_number<T>(it->second.value, it->second.line, full_key);
        doc_.erase(it);
    }

    void finish() const {
        if (doc_.empty()) return;
        const auto& [key, entry] = *doc_.begin();
        throw ConfigError("config line " + std::to_string(entry.line) + ": unknown key '" + key +
                              "'",
                          entry.line, key);
    }

private:
    RawDocument doc_;
};

}  // namespace detail

/// Parse a sectioned key=value document onto a fully defaulted PanelConfig.
/// Unknown keys, malformed numbers and violated invariants are rejected with
/// the offending line and key.
inline PanelConfig parse_config(std::string_view text) {
    detail::ConfigBinder b(detail::scan_config(text));

    PanelConfig cfg;
    MosfetParams nmos = default_nmos();
    MosfetParams pmos = default_pmos();
    double vdd = cfg.chain.vdd;
    double r_trans = cfg.chain.r_trans;
    double pixel_ratio = cfg.chain.pixel_mirror.output_ratio;
    double line_ratio = cfg.chain.line_mirror.output_ratio;
    double row_ratio = cfg.chain.row_mirror.output_ratio;

    b.bind("panel.rows", cfg.rows);
    b.bind("panel.cols", cfg.cols);
    b.bind("panel.frame_time", cfg.frame_time);
    b.bind("panel.adc_bits", cfg.adc_bits);
    b.bind("panel.v_full_scale", cfg.v_full_scale);
    b.bind("panel.seed", cfg.seed);
    b.bind("photodiode.responsivity", cfg.photodiode.responsivity);
    b.bind("photodiode.dark_current", cfg.photodiode.dark_current);
    b.bind("photodiode.c_node", cfg.photodiode.c_node);
    b.bind("nmos.vth", nmos.vth);
    b.bind("nmos.kp", nmos.kp);
    b.bind("nmos.lambda", nmos.lambda);
    b.bind("nmos.sigma_rel", nmos.sigma_rel);
    b.bind("pmos.vth", pmos.vth);
    b.bind("pmos.kp", pmos.kp);
    b.bind("pmos.lambda", pmos.lambda);
    b.bind("pmos.sigma_rel", pmos.sigma_rel);
    b.bind("chain.vdd", vdd);
    b.bind("chain.r_trans", r_trans);
    b.bind("chain.pixel_ratio", pixel_ratio);
    b.bind("chain.line_ratio", line_ratio);
    b.bind("chain.row_ratio", row_ratio);
    b.bind("tft.r_on", cfg.tft.r_on);
    b.bind("tft.i_leak", cfg.tft.i_leak);
    b.bind("scene.lux_max", cfg.lux_max);
    b.bind("solver.abs_tol", cfg.solver.abs_tol);
    b.bind("solver.rel_tol", cfg.solver.rel_tol);
    b.bind("solver.max_iterations", cfg.solver.max_iterations);
    b.finish();

    cfg.chain = make_chain(nmos, pmos, r_trans, vdd, cfg.photodiode.c_node, pixel_ratio,
                           line_ratio, row_ratio);
    validate(cfg);
    return cfg;
}

/// Canonical text form; parse_config(print_config(cfg)) == cfg.
inline std::string print_config(const PanelConfig& cfg) {
    using detail::format_double;
    const auto& nmos = cfg.chain.line_mirror.reference;
    const auto& pmos = cfg.chain.pixel_mirror.reference;
    std::string out;
    auto kv = [&out](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    out += "[panel]\n";
    kv("rows", std::to_string(cfg.rows));
    kv("cols", std::to_string(cfg.cols));
    kv("frame_time", format_double(cfg.frame_time));
    kv("adc_bits", std::to_string(cfg.adc_bits));
    kv("v_full_scale", format_double(cfg.v_full_scale));
    kv("seed", std::to_string(cfg.seed));
    out += "\n[photodiode]\n";
    kv("responsivity", format_double(cfg.photodiode.responsivity));
    kv("dark_current", format_double(cfg.photodiode.dark_current));
    kv("c_node", format_double(cfg.photodiode.c_node));
    out += "\n[nmos]\n";
    kv("vth", format_double(nmos.vth));
    kv("kp", format_double(nmos.kp));
    kv("lambda", format_double(nmos.lambda));
    kv("sigma_rel", format_double(nmos.sigma_rel));
    out += "\n[pmos]\n";
    kv("vth", format_double(pmos.vth));
    kv("kp", format_double(pmos.kp));
    kv("lambda", format_double(pmos.lambda));
    kv("sigma_rel", format_double(pmos.sigma_rel));
    out += "\n[chain]\n";
    kv("vdd", format_double(cfg.chain.vdd));
    kv("r_trans", format_double(cfg.chain.r_trans));
    kv("pixel_ratio", format_double(cfg.chain.pixel_mirror.output_ratio));
    kv("line_ratio", format_double(cfg.chain.line_mirror.output_ratio));
    kv("row_ratio", format_double(cfg.chain.row_mirror.output_ratio));
    out += "\n[tft]\n";
    kv("r_on", format_double(cfg.tft.r_on));
    kv("i_leak", format_double(cfg.tft.i_leak));
    out += "\n[scene]\n";
    kv("lux_max", format_double(cfg.lux_max));
    out += "\n[solver]\n";
    kv("abs_tol", format_double(cfg.solver.abs_tol));
    kv("rel_tol", format_double(cfg.solver.rel_tol));
    kv("max_iterations", std::to_string(cfg.solver.max_iterations));
    return out;
}

}  // namespace fpdsim
