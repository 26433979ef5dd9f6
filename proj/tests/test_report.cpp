/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bcosb/battery.hpp"
#include "bcosb/config.hpp"
#include "bcosb/report.hpp"

using namespace bcosb;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string tiny_config_text(const std::string& extra = "") {
    return "[grid]\n"
           "n_tones = 8\n"
           "spacing_hz = 4312.5\n"
           "symbol_rate_hz = 4000\n"
           "[bands]\n"
           "preset = all\n"
           "[channel]\n"
           "mode = dm\n"
           "loop_lengths_m = 300, 500\n"
           "[budget]\n"
           "kind = per_modem\n"
           "per_modem_dbm = 8.0\n"
           "[weights]\n"
           "w = 0.5, 0.5\n"
           "sweep_count = 3\n"
           "[solver]\n"
           "eps_power_rel = 1e-3\n"
           "grid_levels = 10\n"
           "grid_min_dbm_hz = -80\n"
           "grid_max_dbm_hz = -20\n"
           "max_outer_iters = 300\n" +
           extra;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
}

}  // namespace

TEST_CASE("parse_config: empty document resolves to the documented defaults") {
    auto cfg = parse_config_string("");
    CHECK(cfg.grid.n_tones == 2048);
    CHECK(cfg.grid.spacing_hz == 4312.5);
    CHECK(cfg.grid.symbol_rate_hz == 4000.0);
    CHECK(cfg.bands.label == "vdsl2_down");
    REQUIRE(cfg.bands.intervals.size() == 2);
    CHECK(cfg.bands.intervals[0] == std::pair{138e3, 3.75e6});
    CHECK(cfg.bands.intervals[1] == std::pair{5.2e6, 8.5e6});
    CHECK(cfg.noise_psd_dbm_hz == -140.0);
    CHECK(cfg.budget_kind == PowerBudget::Kind::PerModem);
    CHECK(cfg.total_dbm == 29.0);
    auto b = cfg.make_budget(2);
    REQUIRE(b.per_modem_mw.size() == 2);
    CHECK(b.per_modem_mw[0] == Catch::Approx(dbm_to_mw(14.5)));
    CHECK(cfg.scenario.loop_lengths_m == std::vector<double>{400.0, 800.0});
}

TEST_CASE("parse_config: every section round-trips") {
    auto cfg = parse_config_string(
        "[grid]\n n_tones = 64 \n spacing_hz = 1000 \n symbol_rate_hz = 900\n start_hz = 500\n"
        "[bands]\n intervals = 1000-2000, 3000-4500\n"
        "[channel]\n mode = dm_pm\n loop_lengths_m = 250,750\n fext_kappa = 2e-4\n"
        " pm_gain_db = 4\n velocity_mps = 1.9e8\n direct_k1_db_km = 2.5\n direct_k2_db_km = 12\n"
        "[noise]\n psd_dbm_hz = -135 # AWGN\n"
        "[budget]\n kind = total\n total_dbm = 20\n"
        "[weights]\n w = 0.3, 0.7\n sweep_count = 5\n"
        "[solver]\n eps_power_rel = 1e-4\n refine = false\n step_init = 4\n"
        " psd_grid_dbm_hz = -60, -40, -50\n forced_order = 2, 1\n"
        "[output]\n dir = /tmp/x\n table = yes\n covariance = no\n");
    CHECK(cfg.grid.n_tones == 64);
    CHECK(cfg.grid.start_hz == 500.0);
    CHECK(cfg.bands.label == "custom");
    CHECK(cfg.bands.intervals[1] == std::pair{3000.0, 4500.0});
    CHECK(cfg.scenario.mode == ScenarioSpec::Mode::DM_PM);
    CHECK(cfg.scenario.fext_kappa == 2e-4);
    CHECK(cfg.noise_psd_dbm_hz == -135.0);
    CHECK(cfg.budget_kind == PowerBudget::Kind::Total);
    CHECK(cfg.make_budget(2).total_mw == Catch::Approx(dbm_to_mw(20.0)));
    CHECK(cfg.weight_point == std::vector<double>{0.3, 0.7});
    CHECK(cfg.sweep_count == 5);
    CHECK(cfg.solver.eps_power_rel == 1e-4);
    CHECK_FALSE(cfg.solver.refine);
    CHECK(cfg.solver.step_init == 4.0);
    CHECK(cfg.solver.forced_order == std::vector<std::size_t>{1, 0});
    // explicit grid: prepended zero plus the sorted levels
    auto g = cfg.make_psd_grid();
    REQUIRE(g.size() == 4);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == Catch::Approx(psd_to_tone_power(-60.0, 1000.0)));
    CHECK(g[3] == Catch::Approx(psd_to_tone_power(-40.0, 1000.0)));
    CHECK(cfg.out_dir == "/tmp/x");
    CHECK(cfg.table);
    CHECK_FALSE(cfg.emit_covariance);
}

TEST_CASE("parse_config: schema violations name the key and location") {
    CHECK_THROWS_WITH(parse_config_string("[grid]\nn_tone = 4\n", "demo.ini"),
                      ContainsSubstring("grid.n_tone") && ContainsSubstring("demo.ini:2"));
    CHECK_THROWS_WITH(parse_config_string("[grids]\nn_tones = 4\n"),
                      ContainsSubstring("unknown section '[grids]'"));
    CHECK_THROWS_WITH(parse_config_string("[grid]\nn_tones = 4\nn_tones = 8\n"),
                      ContainsSubstring("duplicate key"));
    CHECK_THROWS_WITH(parse_config_string("[grid]\nn_tones = four\n"),
                      ContainsSubstring("expected a non-negative integer"));
    CHECK_THROWS_WITH(parse_config_string("[solver]\nrefine = maybe\n"),
                      ContainsSubstring("expected a boolean"));
    CHECK_THROWS_AS(parse_config_string("n_tones = 4\n"), ParseError);  // key before section
    CHECK_THROWS_AS(parse_config_string("[grid\nn_tones = 4\n"), ParseError);
    CHECK_THROWS_AS(parse_config_string("[grid]\njust words\n"), ParseError);
    CHECK_THROWS_WITH(parse_config_string("[budget]\nper_modem_dbm = 8,9\nkind = total\n"),
                      ContainsSubstring("conflicts"));
    CHECK_THROWS_WITH(parse_config_string("[bands]\npreset = nope\n"),
                      ContainsSubstring("unknown preset"));
}

TEST_CASE("make_budget: vector length must match the channel width") {
    auto cfg = parse_config_string("[budget]\nper_modem_mw = 1.0, 2.0, 3.0\n");
    CHECK(cfg.make_budget(3).per_modem_mw == std::vector<double>{1.0, 2.0, 3.0});
    CHECK_THROWS_WITH(cfg.make_budget(2), ContainsSubstring("3 entries") &&
                                              ContainsSubstring("2 transmit lines"));
}

TEST_CASE("make_psd_grid: default ladder starts at zero and ascends") {
    auto cfg = parse_config_string("");
    auto g = cfg.make_psd_grid();
    REQUIRE(g.size() == 41);  // zero + 40 log-spaced PSD levels
    CHECK(g.front() == 0.0);
    for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] > g[k - 1]);
    CHECK(g[1] == Catch::Approx(psd_to_tone_power(-120.0, 4312.5)));
    CHECK(g.back() == Catch::Approx(psd_to_tone_power(-40.0, 4312.5)));
}

TEST_CASE("make_sweep_weights: endpoints pinned at pure single-user priority") {
    auto cfg = parse_config_string("[weights]\nsweep_count = 11\n");
    auto ws = cfg.make_sweep_weights();
    REQUIRE(ws.size() == 11);
    CHECK(ws.front()[0] == 0.0);
    CHECK(ws.front()[1] == 1.0);
    CHECK(ws.back()[0] == 1.0);
    CHECK(ws.back()[1] == 0.0);
    CHECK(ws[5][0] == Catch::Approx(0.5));
}

TEST_CASE("run_solve: rate region and covariance artifacts have the documented shape") {
    auto cfg = parse_config_string(tiny_config_text());
    auto out = run_points(cfg, {WeightVector{cfg.weight_point}});
    REQUIRE(out.points.size() == 1);
    CHECK(out.points[0].res.converged);

    std::ostringstream rr;
    write_rate_region_csv(rr, out);
    auto lines = split_lines(rr.str());
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "w1,w2,R1_mbps,R2_mbps,lambda_1,lambda_2,converged");
    auto row = split_csv(lines[1]);
    REQUIRE(row.size() == 7);
    CHECK(row[0] == "0.5");
    CHECK(row[6] == "true");
    CHECK(std::stod(row[2]) > 0.0);

    std::ostringstream cv;
    write_covariance_csv(cv, out.points[0].res, cfg.grid);
    auto clines = split_lines(cv.str());
    CHECK(clines[0] == "tone,freq_mhz,user,m,n,value_dbm_hz,sign");
    // 8 tones x 2 users x full 2x2 entry grid
    REQUIRE(clines.size() == 1 + 8 * 2 * 4);
    double direct_seen = -500.0;
    for (std::size_t i = 1; i < clines.size(); ++i) {
        auto f = split_csv(clines[i]);
        REQUIRE(f.size() == 7);
        const int sign = std::stoi(f[6]);
        const double v = std::stod(f[5]);
        CHECK(sign >= -1);
        CHECK(sign <= 1);
        CHECK(v >= -400.0);
        if (v == -400.0) CHECK(sign == 0);
        if (f[3] == f[4]) direct_seen = std::max(direct_seen, v);
    }
    CHECK(direct_seen > -400.0);

    // off-diagonal magnitude symmetry: the (m,n) and (n,m) rows agree bytewise
    for (std::size_t i = 1; i < clines.size(); ++i) {
        auto f = split_csv(clines[i]);
        if (f[3] == "1" && f[4] == "2") {
            bool found = false;
            for (std::size_t k = 1; k < clines.size(); ++k) {
                auto g = split_csv(clines[k]);
                if (g[0] == f[0] && g[2] == f[2] && g[3] == "2" && g[4] == "1") {
                    CHECK(g[5] == f[5]);
                    CHECK(g[6] == f[6]);
                    found = true;
                }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("run_sweep: zero-weight endpoints silence the matching user") {
    auto cfg = parse_config_string(tiny_config_text());
    auto out = run_sweep(cfg);
    REQUIRE(out.points.size() == 3);
    CHECK(out.points.front().res.rates_mbps[0] == 0.0);  // w1 = 0
    CHECK(out.points.back().res.rates_mbps[1] == 0.0);   // w1 = 1
    for (const auto& pt : out.points) CHECK(pt.res.converged);
    CHECK(out.covariance_point == 1);  // the equal-weight point carries the spectrum
}

TEST_CASE("run_points: table mode solves both encoding orders at equal weights") {
    auto cfg = parse_config_string(tiny_config_text("[output]\ntable = true\n"));
    auto out = run_solve(cfg);
    REQUIRE(out.table_rows.size() == 2);
    std::vector<std::string> labels = {out.table_rows[0].label, out.table_rows[1].label};
    CHECK((labels[0] == "User 2 first" && labels[1] == "User 1 first"));
    std::ostringstream os;
    print_order_table(os, out);
    CHECK_THAT(os.str(), ContainsSubstring("User 1 first"));
    CHECK_THAT(os.str(), ContainsSubstring("User 2 first"));
}

TEST_CASE("emit_run_outputs: files land in the output directory; reruns are byte-identical") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "bcosb_report_test";
    fs::remove_all(dir);
    auto cfg = parse_config_string(tiny_config_text());
    cfg.out_dir = (dir / "a").string();
    auto out = run_solve(cfg);
    CHECK(emit_run_outputs(cfg, out, "solve") == 0);
    for (const char* name : {"rate_region.csv", "covariance_spectrum.csv", "summary.json"})
        CHECK(fs::exists(fs::path(cfg.out_dir) / name));

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    cfg.out_dir = (dir / "b").string();
    auto out2 = run_solve(cfg);
    emit_run_outputs(cfg, out2, "solve");
    CHECK(slurp(dir / "a" / "rate_region.csv") == slurp(dir / "b" / "rate_region.csv"));
    CHECK(slurp(dir / "a" / "covariance_spectrum.csv") ==
          slurp(dir / "b" / "covariance_spectrum.csv"));
    fs::remove_all(dir);
}

TEST_CASE("summary_json: carries version, echo, and per-point convergence") {
    auto cfg = parse_config_string(tiny_config_text());
    auto out = run_solve(cfg);
    auto j = summary_json(cfg, out, "solve");
    CHECK(j["version"] == kVersionString);
    CHECK(j["command"] == "solve");
    CHECK(j["config"]["grid"]["n_tones"] == 8);
    CHECK(j["config"]["budget"]["kind"] == "per_modem");
    REQUIRE(j["points"].size() == 1);
    CHECK(j["points"][0]["converged"].is_boolean());
    CHECK(j["points"][0]["duality"]["passed"] == true);
    CHECK(j["points"][0]["rates_mbps"].size() == 2);
}

TEST_CASE("run_synth: channel CSV round-trips through the loader") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "bcosb_synth_test";
    fs::remove_all(dir);
    auto cfg = parse_config_string(tiny_config_text());
    cfg.out_dir = dir.string();
    run_synth(cfg);
    std::ifstream in(dir / "channel.csv");
    REQUIRE(in.good());
    auto ch = load_channel_csv(in);
    CHECK(ch.n_tones == 8);
    CHECK(ch.n_tx == 2);
    auto direct = cfg.make_channel();
    double delta = 0.0;
    for (std::size_t i = 0; i < 8; ++i) delta = std::max(delta, (ch.tones[i] - direct.tones[i]).norm());
    CHECK(delta <= 1e-12);
    fs::remove_all(dir);
}

TEST_CASE("make_battery_instance: deterministic in seed and index") {
    auto a = make_battery_instance(9, 4);
    auto b = make_battery_instance(9, 4);
    auto c = make_battery_instance(9, 5);
    REQUIRE(a.ch.n_tones == b.ch.n_tones);
    CHECK((a.ch.tones[0] - b.ch.tones[0]).norm() == 0.0);
    CHECK(a.budget_mw == b.budget_mw);
    bool differs = a.ch.n_tones != c.ch.n_tones || a.ch.n_tx != c.ch.n_tx ||
                   a.ch.n_rx != c.ch.n_rx;
    if (!differs) differs = (a.ch.tones[0] - c.ch.tones[0]).norm() > 0.0;
    CHECK(differs);
}

TEST_CASE("battery: a reduced randomized battery passes every named check") {
    BatteryOptions opt;
    opt.instances = 12;
    opt.seed = 5;
    auto checks = battery_checks(run_battery_stats(opt));
    for (const auto& c : checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
}

TEST_CASE("run_validation: tiny configured instance plus battery all pass") {
    auto cfg = parse_config_string(tiny_config_text());
    BatteryOptions opt;
    opt.instances = 6;
    opt.seed = 11;
    auto checks = run_validation(cfg, opt);
    bool saw_negative_control = false;
    for (const auto& c : checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
        saw_negative_control = saw_negative_control || c.name == "negative-control";
    }
    CHECK(saw_negative_control);
    CHECK(all_passed(checks));
}
