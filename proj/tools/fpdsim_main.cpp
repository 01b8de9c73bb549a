// fpdsim command-line front end.
//
// Subcommands: dc, frame, bin, led, transient, sweep. Every subcommand
// accepts --config / --scene / --seed / --out; results go to --out when
// given, stdout otherwise. Exit codes: 0 ok, 1 usage, 2 config, 3 solver,
// 4 I/O.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fpdsim/fpdsim.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

constexpr std::uint32_t kSweepSeedTag = 8;

struct Options {
    std::string config_path;
    std::string scene_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;

    double lux = 0.4;  // dc

    std::string bin_mode = "sum";  // bin
    std::string bin_block = "2x2";

    double v_ref = 2.5;  // led

    double amplitude = 0.4;  // transient
    double baseline = 0.0;
    double period = 0.0;  // 0 = auto
    double duty = 0.5;
    double dt = 0.0;     // 0 = auto
    double t_end = 0.0;  // 0 = auto

    int trials = 16;  // sweep
};

void add_common(CLI::App* cmd, Options& opt, std::vector<CLI::Option*>& seed_opts,
                bool scene_required) {
    cmd->add_option("--config", opt.config_path, "Configuration file (key = value sections)");
    auto* scene = cmd->add_option("--scene", opt.scene_path, "Scene file (CSV lux grid or PGM)");
    if (scene_required) scene->required();
    seed_opts.push_back(
        cmd->add_option("--seed", opt.seed, "Mismatch master seed (overrides config and env)"));
    cmd->add_option("--out", opt.out_path, "Output file (stdout when omitted)");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw fpdsim::IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw fpdsim::IoError("failed reading '" + path + "'");
    return buf.str();
}

fpdsim::PanelConfig effective_config(const Options& opt) {
    fpdsim::PanelConfig cfg =
        opt.config_path.empty() ? fpdsim::parse_config("")
                                : fpdsim::parse_config(read_text_file(opt.config_path));
    if (opt.seed_given) {
        cfg.seed = opt.seed;
    } else if (const char* env = std::getenv("FPDSIM_SEED")) {
        std::uint64_t s{};
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), s);
        if (ec != std::errc{} || ptr != env + std::strlen(env))
            throw fpdsim::ConfigError("FPDSIM_SEED is not an unsigned integer: '" +
                                      std::string(env) + "'");
        cfg.seed = s;
    }
    return cfg;
}

fpdsim::Scene scene_for(const Options& opt, const fpdsim::PanelConfig& cfg) {
    fpdsim::Scene scene = fpdsim::load_scene(opt.scene_path, cfg.lux_max);
    if (scene.rows != cfg.rows || scene.cols != cfg.cols)
        throw fpdsim::DomainError("scene dimensions " + std::to_string(scene.rows) + "x" +
                                  std::to_string(scene.cols) + " do not match config " +
                                  std::to_string(cfg.rows) + "x" + std::to_string(cfg.cols));
    return scene;
}

void emit(const std::string& out_path, const std::string& contents) {
    if (out_path.empty()) {
        std::fwrite(contents.data(), 1, contents.size(), stdout);
        return;
    }
    fpdsim::detail::atomic_write(out_path, contents);
}

void emit_frame(const Options& opt, const fpdsim::Frame& frame) {
    if (opt.out_path.empty()) {
        emit("", fpdsim::frame_csv_string(frame));
        return;
    }
    fpdsim::write_frame(opt.out_path, frame);
}

void run_dc(const Options& opt) {
    const auto cfg = effective_config(opt);
    if (!(opt.lux >= 0.0)) throw fpdsim::DomainError("--lux must be >= 0");
    const fpdsim::Panel panel(cfg);
    const double i_photo = fpdsim::photocurrent(cfg.photodiode, opt.lux);
    const auto s = fpdsim::solve_pixel_chain(panel.chain(0, 0), i_photo, cfg.solver);
    std::string out = "i_line,i_row,v_line,v_row\n";
    out += fpdsim::detail::format_double(s.i_line) + "," +
           fpdsim::detail::format_double(s.i_row) + "," +
           fpdsim::detail::format_double(s.v_line) + "," +
           fpdsim::detail::format_double(s.v_row) + "\n";
    emit(opt.out_path, out);
}

void run_frame(const Options& opt) {
    const auto cfg = effective_config(opt);
    const fpdsim::Panel panel(cfg);
    const auto scene = scene_for(opt, cfg);
    const auto [frame, log] = fpdsim::scan_frame(panel, scene);
    (void)log;
    emit_frame(opt, frame);
}

std::pair<int, int> parse_block(const std::string& text) {
    const auto x = text.find('x');
    int br{}, bc{};
    bool ok = x != std::string::npos;
    if (ok) {
        const char* s = text.data();
        auto r1 = std::from_chars(s, s + x, br);
        auto r2 = std::from_chars(s + x + 1, s + text.size(), bc);
        ok = r1.ec == std::errc{} && r1.ptr == s + x && r2.ec == std::errc{} &&
             r2.ptr == s + text.size() && br >= 1 && bc >= 1;
    }
    if (!ok)
        throw fpdsim::DomainError("--block must look like RxC with positive integers, got '" +
                                  text + "'");
    return {br, bc};
}

void run_bin(const Options& opt) {
    const auto cfg = effective_config(opt);
    if (opt.bin_mode != "sum" && opt.bin_mode != "avg")
        throw fpdsim::DomainError("--mode must be 'sum' or 'avg', got '" + opt.bin_mode + "'");
    const auto [br, bc] = parse_block(opt.bin_block);
    const fpdsim::Panel panel(cfg);
    const auto scene = scene_for(opt, cfg);
    const auto pattern = fpdsim::block_pattern(cfg.rows, cfg.cols, br, bc);
    const auto frame = opt.bin_mode == "sum" ? fpdsim::binned_read(panel, scene, pattern)
                                             : fpdsim::resolution_reduce(panel, scene, pattern);
    emit_frame(opt, frame);
}

void run_led(const Options& opt) {
    const auto cfg = effective_config(opt);
    const fpdsim::Panel panel(cfg);
    const auto scene = scene_for(opt, cfg);
    const auto led = fpdsim::led_test(panel, scene, opt.v_ref);
    emit(opt.out_path, fpdsim::led_csv_string(led));
}

void run_transient(const Options& opt) {
    const auto cfg = effective_config(opt);
    const fpdsim::Panel panel(cfg);
    const auto& chain = panel.chain(0, 0);

    fpdsim::Stimulus stim;
    stim.kind = fpdsim::WaveformKind::PulseTrain;
    stim.amplitude = opt.amplitude;
    stim.baseline = opt.baseline;
    stim.duty = opt.duty;

    // Auto timing from the linearized node time constant at the ON level.
    const double tau =
        fpdsim::estimate_time_constant(chain, cfg.photodiode, opt.baseline + opt.amplitude);
    stim.period = opt.period > 0.0 ? opt.period : 2.0 * tau;
    const double dt = opt.dt > 0.0 ? opt.dt : tau / 50.0;
    const double t_end = opt.t_end > 0.0 ? opt.t_end : 10.0 * stim.period;

    const auto trace =
        fpdsim::pulsed_response(chain, cfg.photodiode, stim, dt, t_end, cfg.solver);
    emit(opt.out_path, fpdsim::trace_csv_string(trace));
}

void run_sweep(const Options& opt) {
    const auto cfg = effective_config(opt);
    if (opt.trials < 1) throw fpdsim::DomainError("--trials must be >= 1");
    const fpdsim::Scene scene = opt.scene_path.empty()
                                    ? fpdsim::Scene::uniform(cfg.rows, cfg.cols, 0.4)
                                    : scene_for(opt, cfg);

    std::string out = "trial,seed,i_mean,i_std,i_min,i_max\n";
    for (int trial = 0; trial < opt.trials; ++trial) {
        fpdsim::PanelConfig trial_cfg = cfg;
        trial_cfg.seed =
            fpdsim::coord_seed(cfg.seed, kSweepSeedTag, static_cast<std::uint32_t>(trial), 0);
        const fpdsim::Panel panel(trial_cfg);
        const auto currents = fpdsim::scan_currents(panel, scene);

        double mean = 0.0;
        for (double i : currents) mean += i;
        mean /= static_cast<double>(currents.size());
        double var = 0.0;
        for (double i : currents) var += (i - mean) * (i - mean);
        const double stdev = currents.size() > 1
                                 ? std::sqrt(var / static_cast<double>(currents.size() - 1))
                                 : 0.0;
        const auto [lo, hi] = std::minmax_element(currents.begin(), currents.end());

        out += std::to_string(trial) + "," + std::to_string(trial_cfg.seed) + "," +
               fpdsim::detail::format_double(mean) + "," +
               fpdsim::detail::format_double(stdev) + "," +
               fpdsim::detail::format_double(*lo) + "," + fpdsim::detail::format_double(*hi) +
               "\n";
    }
    emit(opt.out_path, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fpdsim - current-mirror flat-panel readout simulator"};
    app.require_subcommand(1);

    Options opt;
    std::vector<CLI::Option*> seed_opts;

    auto* dc = app.add_subcommand("dc", "Single-chain DC operating point");
    add_common(dc, opt, seed_opts, false);
    dc->add_option("--lux", opt.lux, "Illuminance in lux (default 0.4)");

    auto* frame = app.add_subcommand("frame", "Full-resolution progressive scan");
    add_common(frame, opt, seed_opts, true);

    auto* bin = app.add_subcommand("bin", "Binned readout by node summation");
    add_common(bin, opt, seed_opts, true);
    bin->add_option("--mode", opt.bin_mode, "sum | avg (default sum)");
    bin->add_option("--block", opt.bin_block, "Block shape RxC (default 2x2)");

    auto* led = app.add_subcommand("led", "Comparator/AND LED matrix test");
    add_common(led, opt, seed_opts, true);
    led->add_option("--vref", opt.v_ref, "Comparator reference voltage (default 2.5)");

    auto* transient = app.add_subcommand("transient", "Pulsed-illumination dynamic response");
    add_common(transient, opt, seed_opts, false);
    transient->add_option("--amplitude", opt.amplitude, "Pulse amplitude in lux (default 0.4)");
    transient->add_option("--baseline", opt.baseline, "Baseline illuminance in lux (default 0)");
    transient->add_option("--period", opt.period, "Pulse period in s (default 2*tau)");
    transient->add_option("--duty", opt.duty, "Duty cycle in [0,1] (default 0.5)");
    transient->add_option("--dt", opt.dt, "Time step in s (default tau/50)");
    transient->add_option("--tend", opt.t_end, "End time in s (default 10 periods)");

    auto* sweep = app.add_subcommand("sweep", "Seeded Monte Carlo mismatch trials");
    add_common(sweep, opt, seed_opts, false);
    sweep->add_option("--trials", opt.trials, "Number of trials (default 16)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "fpdsim: error: usage: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    for (const auto* o : seed_opts) opt.seed_given = opt.seed_given || o->count() > 0;

    try {
        if (dc->parsed()) run_dc(opt);
        else if (frame->parsed()) run_frame(opt);
        else if (bin->parsed()) run_bin(opt);
        else if (led->parsed()) run_led(opt);
        else if (transient->parsed()) run_transient(opt);
        else if (sweep->parsed()) run_sweep(opt);
        return kExitOk;
    } catch (const fpdsim::ConfigError& e) {
        std::cerr << "fpdsim: error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fpdsim::PatternError& e) {
        std::cerr << "fpdsim: error: pattern: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fpdsim::SolverError& e) {
        std::cerr << "fpdsim: error: solver: " << e.what() << "\n";
        return kExitSolver;
    } catch (const fpdsim::IoError& e) {
        std::cerr << "fpdsim: error: io: " << e.what() << "\n";
        return kExitIo;
    } catch (const fpdsim::DomainError& e) {
        std::cerr << "fpdsim: error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "fpdsim: error: internal: " << e.what() << "\n";
        return kExitUsage;
    }
}
