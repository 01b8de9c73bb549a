#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include <fpdsim/validation.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace fpdsim;
using testutil::rel_diff;

namespace {

PanelConfig ideal_config(int rows = 4, int cols = 4) {
    PanelConfig cfg;
    cfg.rows = rows;
    cfg.cols = cols;
    MosfetParams n{Polarity::Nmos, 0.8, 5e-5, 0.0, 0.0};
    MosfetParams p{Polarity::Pmos, 0.9, 1.7e-5, 0.0, 0.0};
    cfg.chain = make_chain(n, p);
    cfg.photodiode = {1e-9, 0.0, 1e-12};
    return cfg;
}

/// Line/row aggregates recomputed from per-pixel oracle solves.
struct OracleAggregates {
    std::vector<double> v_line;
    std::vector<double> v_row;
};

OracleAggregates oracle_aggregates(const Panel& panel, const Scene& scene) {
    OracleAggregates agg;
    const auto& cfg = panel.config();
    std::vector<std::vector<double>> line(panel.rows()), row(panel.cols());
    for (int r = 0; r < panel.rows(); ++r)
        for (int c = 0; c < panel.cols(); ++c) {
            const auto ref = oracle::chain_solve(panel.chain(r, c),
                                                 photocurrent(cfg.photodiode, scene.lux_at(r, c)));
            line[r].push_back(ref.i_line);
            row[c].push_back(ref.i_row);
        }
    for (int r = 0; r < panel.rows(); ++r)
        agg.v_line.push_back(cfg.chain.r_trans * oracle::sum_reference(line[r]));
    for (int c = 0; c < panel.cols(); ++c)
        agg.v_row.push_back(cfg.chain.r_trans * oracle::sum_reference(row[c]));
    return agg;
}

std::set<std::pair<int, int>> lit_set(const LedMatrixState& led) {
    std::set<std::pair<int, int>> s;
    for (int r = 0; r < led.rows; ++r)
        for (int c = 0; c < led.cols; ++c)
            if (led.is_lit(r, c)) s.insert({r, c});
    return s;
}

}  // namespace

TEST_CASE("led_test") {
    const PanelConfig cfg;  // defaults: dark current present, mismatch off
    const Panel panel(cfg);

    SECTION("all-dark scene lights nothing") {
        const auto led = led_test(panel, Scene::uniform(4, 4, 0.0), 0.01);
        REQUIRE(lit_set(led).empty());
        for (double v : led.line_out) REQUIRE(v == 0.0);
        for (double v : led.row_out) REQUIRE(v == 0.0);
    }

    SECTION("one bright pixel lights exactly its LED") {
        Scene scene = Scene::uniform(4, 4, 0.0);
        scene.lux[1 * 4 + 2] = 1.0;
        const auto led = led_test(panel, scene, 1e-4);
        REQUIRE(lit_set(led) == std::set<std::pair<int, int>>{{1, 2}});
    }

    SECTION("two bright pixels produce the four-LED ghost pattern") {
        Scene scene = Scene::uniform(4, 4, 0.0);
        scene.lux[0 * 4 + 0] = 1.0;
        scene.lux[3 * 4 + 3] = 1.0;
        const auto led = led_test(panel, scene, 1e-4);
        // AND of line/row projections necessarily lights the intersections too.
        REQUIRE(lit_set(led) ==
                std::set<std::pair<int, int>>{{0, 0}, {0, 3}, {3, 0}, {3, 3}});
    }

    SECTION("lit set is always the cartesian product of high lines and rows") {
        std::mt19937_64 rng(4001);
        for (int trial = 0; trial < 100; ++trial) {
            Scene scene = Scene::uniform(4, 4, 0.0);
            for (auto& v : scene.lux) v = testutil::uniform(rng, 0.0, 2.0);
            const double v_ref = testutil::uniform(rng, 0.0, 10.0);
            const auto led = led_test(panel, scene, v_ref);

            const auto agg = oracle_aggregates(panel, scene);
            const ComparatorSpec cmp{v_ref};
            for (int r = 0; r < 4; ++r) {
                // Aggregates can sit close to the threshold; only check when
                // the oracle puts them clearly on one side.
                if (rel_diff(agg.v_line[r], v_ref) > 1e-6)
                    REQUIRE(led.line_out[r] == comparator_out(cmp, agg.v_line[r]));
            }
            for (int c = 0; c < 4; ++c)
                if (rel_diff(agg.v_row[c], v_ref) > 1e-6)
                    REQUIRE(led.row_out[c] == comparator_out(cmp, agg.v_row[c]));
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    REQUIRE(led.is_lit(r, c) ==
                            (led.line_out[r] == 5.0 && led.row_out[c] == 5.0));
        }
    }

    SECTION("raising the threshold never adds an LED") {
        std::mt19937_64 rng(4002);
        Scene scene = Scene::uniform(4, 4, 0.0);
        for (auto& v : scene.lux) v = testutil::uniform(rng, 0.0, 2.0);
        double v_ref = 1e-5;
        auto prev = lit_set(led_test(panel, scene, v_ref));
        for (int k = 0; k < 12; ++k) {
            v_ref *= 4.0;
            const auto cur = lit_set(led_test(panel, scene, v_ref));
            for (const auto& led : cur) REQUIRE(prev.count(led) == 1);
            prev = cur;
        }
    }

    SECTION("transposing the scene transposes the LED matrix") {
        std::mt19937_64 rng(4003);
        Scene scene = Scene::uniform(4, 4, 0.0);
        for (auto& v : scene.lux) v = testutil::uniform(rng, 0.0, 2.0);
        Scene transposed = Scene::uniform(4, 4, 0.0);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) transposed.lux[c * 4 + r] = scene.lux[r * 4 + c];

        const auto led = led_test(panel, scene, 2e-3);
        const auto led_t = led_test(panel, transposed, 2e-3);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) REQUIRE(led.is_lit(r, c) == led_t.is_lit(c, r));
    }

    SECTION("dimension mismatch is rejected") {
        REQUIRE_THROWS_AS(led_test(panel, Scene::uniform(2, 4, 0.0), 1.0), DomainError);
    }
}

TEST_CASE("pulsed_response") {
    const PanelConfig cfg;
    const Panel panel(cfg);
    const auto& chain = panel.chain(0, 0);
    const auto& pd = cfg.photodiode;
    const double tau = estimate_time_constant(chain, pd, 0.4);

    SECTION("zero amplitude is flat at the baseline DC value") {
        Stimulus stim{WaveformKind::PulseTrain, 0.0, 10.0 * tau, 0.5, 0.2};
        const auto tr = pulsed_response(chain, pd, stim, tau / 20.0, 5.0 * tau);
        const double dc = solve_pixel_chain(chain, photocurrent(pd, 0.2)).i_line;
        for (const auto& s : tr.samples) REQUIRE(rel_diff(s.i_out, dc) <= 1e-12);
    }

    SECTION("duty = 1 degenerates to a step response") {
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 3.0 * tau, 1.0, 0.0};
        const auto pulsed = pulsed_response(chain, pd, stim, tau / 25.0, 6.0 * tau);
        const auto step = simulate_transient(
            chain, pd, [](double t) { return t > 0.0 ? 0.4 : 0.0; }, tau / 25.0, 6.0 * tau);
        REQUIRE(pulsed == step);
    }

    SECTION("settles into a periodic steady state") {
        // Tie the period to the slowest (baseline) time constant so ten
        // periods genuinely forget the initial condition.
        const double tau_base = estimate_time_constant(chain, pd, 0.1);
        const double dt = tau_base / 20.0;
        const double period = 41.0 * dt;  // odd count: pulse edges fall between samples
        Stimulus stim{WaveformKind::PulseTrain, 0.4, period, 0.5, 0.1};
        const auto tr = pulsed_response(chain, pd, stim, dt, 12.0 * period);

        const std::size_t n_period = 41;
        const std::size_t start = 10 * n_period;
        double diff_sq = 0.0, swing_lo = 1e300, swing_hi = -1e300;
        for (std::size_t k = start; k < start + n_period; ++k) {
            const double a = tr.samples[k].i_out;
            const double b = tr.samples[k + n_period].i_out;
            diff_sq += (a - b) * (a - b);
            swing_lo = std::min(swing_lo, a);
            swing_hi = std::max(swing_hi, a);
        }
        const double rms = std::sqrt(diff_sq / n_period);
        REQUIRE(rms <= 1e-3 * (swing_hi - swing_lo));
    }

    SECTION("invalid stimulus is rejected") {
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 0.0, 0.5, 0.0};
        REQUIRE_THROWS_AS(pulsed_response(chain, pd, stim, 1e-6, 1e-4), DomainError);
        stim.period = 1e-5;
        stim.duty = 1.5;
        REQUIRE_THROWS_AS(pulsed_response(chain, pd, stim, 1e-6, 1e-4), DomainError);
    }
}

TEST_CASE("multi_pixel_response") {
    std::mt19937_64 rng(4004);

    SECTION("a single pixel reproduces pulsed_response") {
        const Panel panel(ideal_config());
        const auto& cfg = panel.config();
        const double tau = estimate_time_constant(cfg.chain, cfg.photodiode, 0.4);
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 4.0 * tau, 0.5, 0.0};
        const auto joint =
            multi_pixel_response(panel, {{2, 1}}, stim, tau / 30.0, 8.0 * tau);
        const auto single =
            pulsed_response(panel.chain(2, 1), cfg.photodiode, stim, tau / 30.0, 8.0 * tau);
        REQUIRE(joint.samples.size() == single.samples.size());
        for (std::size_t k = 0; k < joint.samples.size(); ++k)
            REQUIRE(joint.samples[k].i_out == single.samples[k].i_out);
    }

    SECTION("k identical ideal pixels scale the trace by k") {
        const Panel panel(ideal_config());
        const auto& cfg = panel.config();
        const double tau = estimate_time_constant(cfg.chain, cfg.photodiode, 0.4);
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 4.0 * tau, 0.5, 0.0};
        const auto single =
            pulsed_response(panel.chain(0, 0), cfg.photodiode, stim, tau / 30.0, 8.0 * tau);

        for (int k : {2, 4, 16}) {
            std::vector<std::pair<int, int>> pixels;
            for (int p = 0; p < k; ++p) pixels.push_back({p / 4, p % 4});
            const auto joint = multi_pixel_response(panel, pixels, stim, tau / 30.0, 8.0 * tau);
            for (std::size_t s = 0; s < joint.samples.size(); ++s)
                REQUIRE(rel_diff(joint.samples[s].i_out, k * single.samples[s].i_out) <= 1e-12);
        }
    }

    SECTION("superposition holds with mismatch enabled") {
        PanelConfig cfg;
        for (MirrorSpec* m :
             {&cfg.chain.pixel_mirror, &cfg.chain.line_mirror, &cfg.chain.row_mirror}) {
            m->reference.sigma_rel = 0.02;
            for (auto& o : m->outputs) o.sigma_rel = 0.02;
        }
        cfg.seed = 77;
        const Panel panel(cfg);
        const double tau = estimate_time_constant(cfg.chain, cfg.photodiode, 0.4);
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 4.0 * tau, 0.5, 0.05};

        const std::vector<std::pair<int, int>> pixels{{0, 0}, {1, 2}, {3, 3}};
        const auto joint = multi_pixel_response(panel, pixels, stim, tau / 30.0, 8.0 * tau);

        std::vector<Trace> singles;
        for (const auto& [r, c] : pixels)
            singles.push_back(pulsed_response(panel.chain(r, c), cfg.photodiode, stim,
                                              tau / 30.0, 8.0 * tau, cfg.solver));
        for (std::size_t s = 0; s < joint.samples.size(); ++s) {
            std::vector<double> parts;
            for (const auto& tr : singles) parts.push_back(tr.samples[s].i_out);
            REQUIRE(rel_diff(joint.samples[s].i_out, oracle::sum_reference(parts)) <= 1e-9);
        }
    }

    SECTION("deviation from baseline scales linearly for small amplitudes") {
        const Panel panel(ideal_config());
        const auto& cfg = panel.config();
        const double base = 0.4;
        const double tau = estimate_time_constant(cfg.chain, cfg.photodiode, base);
        const double a1 = 4e-4;

        auto deviation = [&](double amplitude) {
            Stimulus stim{WaveformKind::PulseTrain, amplitude, 8.0 * tau, 1.0, base};
            const auto tr = pulsed_response(panel.chain(0, 0), cfg.photodiode, stim,
                                            tau / 100.0, 2.0 * tau);
            std::vector<double> dev;
            for (const auto& s : tr.samples) dev.push_back(s.i_out - tr.samples[0].i_out);
            return dev;
        };

        const auto d1 = deviation(a1);
        const auto d2 = deviation(2.0 * a1);
        const double d2_max = *std::max_element(d2.begin(), d2.end());
        for (std::size_t k = 0; k < d1.size(); ++k)
            if (d2[k] > 0.2 * d2_max)
                REQUIRE(std::abs(d2[k] - 2.0 * d1[k]) <= 0.01 * d2[k]);
    }

    SECTION("bad pixel sets are rejected") {
        const Panel panel(ideal_config());
        Stimulus stim{WaveformKind::PulseTrain, 0.4, 1e-5, 0.5, 0.0};
        REQUIRE_THROWS_AS(multi_pixel_response(panel, {}, stim, 1e-6, 1e-4), DomainError);
        REQUIRE_THROWS_AS(multi_pixel_response(panel, {{4, 0}}, stim, 1e-6, 1e-4), DomainError);
        REQUIRE_THROWS_AS(multi_pixel_response(panel, {{1, 1}, {1, 1}}, stim, 1e-6, 1e-4),
                          DomainError);
    }
}
