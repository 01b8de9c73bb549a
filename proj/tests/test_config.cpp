#include <catch2/catch_amalgamated.hpp>

#include <string>

#include <fpdsim/config.hpp>

using namespace fpdsim;

TEST_CASE("parse_config defaults") {
    const PanelConfig cfg = parse_config("");
    REQUIRE(cfg.rows == 4);
    REQUIRE(cfg.cols == 4);
    REQUIRE(cfg.adc_bits == 12);
    REQUIRE(cfg.v_full_scale == 5.0);
    REQUIRE(cfg.chain.vdd == 5.0);
    REQUIRE(cfg.chain.r_trans == 1e6);
    REQUIRE(cfg.chain.line_mirror.reference.vth == 0.8);
    REQUIRE(cfg.chain.line_mirror.reference.kp == 5e-5);
    REQUIRE(cfg.chain.pixel_mirror.reference.vth == 0.9);
    REQUIRE(cfg.chain.pixel_mirror.reference.kp == 1.7e-5);
    REQUIRE(cfg.chain.pixel_mirror.reference.polarity == Polarity::Pmos);
    REQUIRE(cfg.photodiode.responsivity == 1e-9);
    REQUIRE(cfg.solver.abs_tol == 1e-12);
    REQUIRE(cfg.solver.max_iterations == 100);
    REQUIRE(cfg.seed == 0);
}

TEST_CASE("parse_config reads sections, comments and overrides") {
    const std::string text = R"(# panel geometry
[panel]
rows = 8
cols=6
seed = 18446744073709551615

; device tweaks
[nmos]
kp = 6.25e-5
sigma_rel = 0.01

[chain]
r_trans = 2.5e6
)";
    const PanelConfig cfg = parse_config(text);
    REQUIRE(cfg.rows == 8);
    REQUIRE(cfg.cols == 6);
    REQUIRE(cfg.seed == 18446744073709551615ULL);
    REQUIRE(cfg.chain.line_mirror.reference.kp == 6.25e-5);
    REQUIRE(cfg.chain.line_mirror.reference.sigma_rel == 0.01);
    REQUIRE(cfg.chain.line_mirror.outputs[0].sigma_rel == 0.01);
    REQUIRE(cfg.chain.r_trans == 2.5e6);
    // untouched keys keep their defaults
    REQUIRE(cfg.chain.pixel_mirror.reference.kp == 1.7e-5);
}

TEST_CASE("parse_config round-trips through print_config") {
    SECTION("defaults") {
        const PanelConfig cfg = parse_config("");
        REQUIRE(parse_config(print_config(cfg)) == cfg);
    }
    SECTION("modified values, including awkward decimals") {
        const PanelConfig cfg = parse_config(
            "[panel]\nrows = 7\nframe_time = 0.0123456789012345\n"
            "[pmos]\nkp = 1.6999999999999998e-5\nlambda = 0.1\n"
            "[photodiode]\nc_node = 3.3e-13\n"
            "[solver]\nrel_tol = 2e-13\n");
        REQUIRE(parse_config(print_config(cfg)) == cfg);
    }
}

TEST_CASE("parse_config rejects bad documents") {
    SECTION("unknown key names the line and key") {
        try {
            parse_config("[panel]\nrows = 4\nrowz = 4\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(e.line() == 3);
            REQUIRE(e.key() == "panel.rowz");
            REQUIRE(std::string(e.what()).find("panel.rowz") != std::string::npos);
        }
    }
    SECTION("unknown section") {
        REQUIRE_THROWS_AS(parse_config("[panelx]\nrows = 4\n"), ConfigError);
    }
    SECTION("malformed number") {
        try {
            parse_config("[panel]\nrows = four\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(e.line() == 2);
            REQUIRE(e.key() == "panel.rows");
        }
    }
    SECTION("violated invariant cites the key") {
        try {
            parse_config("[panel]\nrows = -1\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE(e.key() == "rows");
        }
    }
    SECTION("key outside a section") {
        REQUIRE_THROWS_AS(parse_config("rows = 4\n"), ConfigError);
    }
    SECTION("duplicate key") {
        REQUIRE_THROWS_AS(parse_config("[panel]\nrows = 4\nrows = 5\n"), ConfigError);
    }
    SECTION("missing equals sign") {
        REQUIRE_THROWS_AS(parse_config("[panel]\nrows 4\n"), ConfigError);
    }
    SECTION("invariant violations in device sections") {
        REQUIRE_THROWS_AS(parse_config("[nmos]\nkp = 0\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("[panel]\nadc_bits = 0\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("[panel]\nadc_bits = 25\n"), ConfigError);
        REQUIRE_THROWS_AS(parse_config("[photodiode]\nc_node = 0\n"), ConfigError);
    }
}
