#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "dynstiff/control.hpp"
#include "dynstiff/types.hpp"

using Catch::Approx;
using namespace dynstiff;
using control::cplx;

namespace {

// reference subject used throughout: a mid-table elbow with amplification 4
control::PlantConfig nominal() {
    control::PlantConfig cfg;
    cfg.model = {20.0, 0.5, 0.3};
    cfg.M_e = 0.6;
    cfg.alpha = 4.0;
    cfg.omega_sea = 2.0 * M_PI * 10.0;
    cfg.zeta_sea = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("coupled resonances of the reference subject") {
    const auto cfg = nominal();
    CHECK(control::omega_he(cfg) == Approx(4.714045207910317).epsilon(1e-14));
    CHECK(control::omega_he_alpha(cfg) == Approx(6.666666666666667).epsilon(1e-14));
    CHECK(control::omega_he(cfg) < control::omega_he_alpha(cfg));
}

TEST_CASE("plant configuration invariants") {
    CHECK_NOTHROW(control::validate(nominal()));
    auto bad = nominal();
    bad.alpha = 0.5;
    CHECK_THROWS_AS(control::validate(bad), ValidationError);
    bad = nominal();
    bad.zeta_sea = 0.0;
    CHECK_THROWS_AS(control::validate(bad), ValidationError);
    bad = nominal();
    bad.omega_sea = 5.0;  // below the attenuated resonance 6.67
    CHECK_THROWS_AS(control::validate(bad), ValidationError);
    bad = nominal();
    bad.model.K_h = 0.0;
    CHECK_THROWS_AS(control::validate(bad), ValidationError);
}

TEST_CASE("amplification error ratio spans alpha down to the inertia ratio") {
    const auto cfg = nominal();
    const double lo = std::abs(control::augmentation_error_ratio(cfg, 1e-4));
    CHECK(lo == Approx(4.0).epsilon(1e-6));
    // (alpha*M_h + M_e)/(M_h + M_e) = (1.2 + 0.6)/0.9 = 2
    const double hi = std::abs(control::augmentation_error_ratio(cfg, 1e5));
    CHECK(hi == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("plant magnitude hits both asymptotes within tolerance") {
    const auto cfg = nominal();
    const double lo = std::abs(control::eval_plant(cfg, control::omega_he(cfg) / 100.0));
    CHECK(lo == Approx(4.000161136236285).margin(1e-9));
    const double mid_w = std::sqrt(control::omega_he_alpha(cfg) * cfg.omega_sea);
    const double mid = std::abs(control::eval_plant(cfg, mid_w));
    CHECK(mid == Approx(1.987114265582211).margin(1e-9));
    CHECK(std::fabs(mid - 2.0) / 2.0 < 0.02);
}

TEST_CASE("rational transfer function evaluates by paired factors") {
    control::RationalTF tf;
    tf.gain = 5.0;
    tf.zeros = {{-1.0, 0.0}};
    tf.poles = {{-2.0, 0.0}, {-3.0, 0.0}};
    const cplx v = tf.eval({0.0, 2.0});
    CHECK(v.real() == Approx(110.0 / 104.0).epsilon(1e-14));
    CHECK(v.imag() == Approx(-30.0 / 104.0).epsilon(1e-14));
}

TEST_CASE("SEA low pass as rational function matches the closed form") {
    const auto cfg = nominal();
    for (double zeta : {0.5, 1.0, 1.2}) {
        const auto tf = control::sea_lowpass(cfg.omega_sea, zeta);
        auto c2 = cfg;
        c2.zeta_sea = zeta;
        for (double w : control::log_grid(0.1, 1000.0, 20)) {
            const cplx a = tf.eval({0.0, w});
            const cplx b = control::eval_sea(c2, w);
            CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)));
        }
    }
    CHECK_THROWS_AS(control::sea_lowpass(-1.0, 0.5), ValidationError);
}

TEST_CASE("fractional order interval and midpoint selection") {
    const auto iv = control::choose_fractional_order(0.5, 10.0);
    const double atan_ch_deg = std::atan(0.5) * 180.0 / M_PI;
    CHECK(iv.lo == 0.0);
    CHECK(iv.hi == Approx((atan_ch_deg - 10.0) / 90.0).epsilon(1e-14));
    CHECK(iv.selected == Approx(0.09202806209487772).epsilon(1e-12));

    CHECK_THROWS_WITH(control::choose_fractional_order(0.5, 80.0),
                      Catch::Matchers::ContainsSubstring("admissible interval"));
    CHECK_THROWS_AS(control::choose_fractional_order(0.5, atan_ch_deg), ValidationError);
    CHECK_THROWS_AS(control::choose_fractional_order(0.0, 5.0), ValidationError);
    CHECK_NOTHROW(control::choose_fractional_order(0.5, 0.0));
}

TEST_CASE("gain tuning places the crossover exactly") {
    const auto cfg = nominal();
    const double f = 0.09202806209487772;
    const double wc = std::sqrt(control::omega_he(cfg) * control::omega_he_alpha(cfg));
    CHECK(wc == Approx(5.6059761016914305).epsilon(1e-14));
    const double kf = control::tune_gain(cfg, f, wc);
    CHECK(kf == Approx(0.32697912661454376).epsilon(1e-12));
    // the defining identity: |C(j wc) P(j wc)| = 1
    const double mag =
        std::abs(control::eval_fractional(kf, f, wc) * control::eval_plant(cfg, wc));
    CHECK(mag == Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(control::tune_gain(cfg, f, 4.0), ValidationError);   // below omega_he
    CHECK_THROWS_AS(control::tune_gain(cfg, f, 7.0), ValidationError);   // above omega_he_alpha
}

TEST_CASE("log grid covers the band inclusively") {
    const auto g = control::log_grid(1.0, 100.0, 10);
    CHECK(g.front() == Approx(1.0));
    CHECK(g.back() == Approx(100.0).epsilon(1e-12));
    CHECK(g.size() == 21);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    CHECK_THROWS_AS(control::log_grid(0.0, 10.0), ValidationError);
    CHECK_THROWS_AS(control::log_grid(10.0, 1.0), ValidationError);
}

TEST_CASE("lag cascade geometry and band-centre accuracy") {
    const double f = 0.2;
    const auto tf = control::lag_cascade(f, 0.5, 500.0, 12);
    REQUIRE(tf.poles.size() == 12);
    REQUIRE(tf.zeros.size() == 12);
    CHECK(control::cascade_r_pp(f, 0.5, 500.0, 12) == Approx(1.8529220216409525).epsilon(1e-14));
    // zero/pole ratio encodes the fractional order
    const double r_pp = -tf.poles[1].real() / -tf.poles[0].real();
    const double r_zp = -tf.zeros[0].real() / -tf.poles[0].real();
    CHECK(r_zp == Approx(1.1312834366320201).epsilon(1e-12));
    CHECK(std::log(r_zp) / std::log(r_pp) == Approx(f).epsilon(1e-12));
    // first pole on the low edge, last zero on the high edge
    CHECK(-tf.poles.front().real() == Approx(0.5).epsilon(1e-12));
    CHECK(-tf.zeros.back().real() == Approx(500.0).epsilon(1e-9));

    // phase and magnitude slope near -90f deg and -20f dB/dec mid band
    const auto grid = control::log_grid(0.5 * std::sqrt(10.0), 500.0 / std::sqrt(10.0), 200);
    double worst_phase = 0.0;
    std::vector<double> mag_db;
    for (double w : grid) {
        const cplx v = tf.eval({0.0, w});
        worst_phase = std::max(worst_phase, std::fabs(std::arg(v) * 180.0 / M_PI + 18.0));
        mag_db.push_back(20.0 * std::log10(std::abs(v)));
    }
    CHECK(worst_phase == Approx(2.767718470575863).margin(1e-2));
    CHECK(worst_phase < 3.0);
    double worst_slope = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double slope =
            (mag_db[i] - mag_db[i - 1]) / (std::log10(grid[i]) - std::log10(grid[i - 1]));
        worst_slope = std::max(worst_slope, std::fabs(slope + 4.0));
    }
    CHECK(worst_slope < 1.0);
}

TEST_CASE("cascade band-centre slope error shrinks as sections are added") {
    // phase ripple stays bounded but does not vanish (the finite band
    // truncates the pole ladder); the local magnitude slope does converge
    const double wc = std::sqrt(0.5 * 500.0), h = 1.05;
    std::vector<double> slope_err;
    for (int n : {4, 8, 16}) {
        const auto tf = control::lag_cascade(0.2, 0.5, 500.0, n);
        const double m_lo = 20.0 * std::log10(std::abs(tf.eval({0.0, wc / h})));
        const double m_hi = 20.0 * std::log10(std::abs(tf.eval({0.0, wc * h})));
        slope_err.push_back(std::fabs((m_hi - m_lo) / (2.0 * std::log10(h)) + 4.0));

        const auto grid = control::log_grid(0.5 * std::sqrt(10.0), 500.0 / std::sqrt(10.0), 100);
        for (double w : grid)
            CHECK(std::fabs(std::arg(tf.eval({0.0, w})) * 180.0 / M_PI + 18.0) < 3.0);
    }
    CHECK(slope_err[0] == Approx(0.694259).margin(1e-3));
    CHECK(slope_err[1] < slope_err[0]);
    CHECK(slope_err[2] < slope_err[1]);
}

TEST_CASE("lag cascade refuses section counts that cannot hold the ripple") {
    CHECK_THROWS_WITH(control::lag_cascade(0.5, 0.01, 1e4, 2),
                      Catch::Matchers::ContainsSubstring("need n >="));
    CHECK_THROWS_AS(control::lag_cascade(1.5, 0.5, 500.0, 12), ValidationError);
    CHECK_THROWS_AS(control::lag_cascade(0.2, 5.0, 0.5, 12), ValidationError);
    CHECK_THROWS_AS(control::lag_cascade(0.2, 0.5, 500.0, 0), ValidationError);
}

TEST_CASE("margins finds the integrator crossover") {
    const control::LoopFn loop = [](double w) { return cplx{0.0, -7.0 / w}; };  // 7/s
    const auto rep = control::margins(loop, control::log_grid(0.07, 700.0));
    REQUIRE(rep.has_crossover());
    CHECK(rep.omega_crossover() == Approx(7.0).epsilon(1e-3));
    CHECK(rep.phase_margin_deg() == Approx(90.0).margin(0.01));
}

TEST_CASE("margins reports every unity crossing in ascending order") {
    // |L| = exp(1.2 sin(ln w)) crosses 1 at w = 1, e^pi, e^2pi
    const control::LoopFn loop = [](double w) {
        return std::polar(std::exp(1.2 * std::sin(std::log(w))), -M_PI / 4.0);
    };
    const auto rep = control::margins(loop, control::log_grid(0.5, 1000.0));
    REQUIRE(rep.all_crossings.size() == 3);
    CHECK(rep.all_crossings[0].omega == Approx(1.0).epsilon(1e-3));
    CHECK(rep.all_crossings[1].omega == Approx(std::exp(M_PI)).epsilon(1e-3));
    CHECK(rep.all_crossings[2].omega == Approx(std::exp(2.0 * M_PI)).epsilon(1e-3));
    for (const auto& c : rep.all_crossings) CHECK(c.margin_deg == Approx(135.0).margin(0.01));
}

TEST_CASE("margins unwraps phase through -180") {
    // (10/(s + 0.01))^3: phase falls to nearly -270 deg by the crossover
    const control::LoopFn loop = [](double w) {
        const cplx den{0.01, w};
        return std::pow(cplx{10.0, 0.0} / den, 3.0);
    };
    const auto rep = control::margins(loop, control::log_grid(1e-3, 1e3));
    REQUIRE(rep.has_crossover());
    CHECK(rep.omega_crossover() == Approx(10.0).epsilon(1e-3));
    const double expect_pm = 180.0 - 3.0 * std::atan2(10.0, 0.01) * 180.0 / M_PI;
    CHECK(rep.phase_margin_deg() == Approx(expect_pm).margin(0.05));
    CHECK(rep.phase_margin_deg() < -89.0);
}

TEST_CASE("margins input validation and no-crossover case") {
    const control::LoopFn tiny = [](double) { return cplx{1e-3, 0.0}; };
    CHECK_FALSE(control::margins(tiny, control::log_grid(0.1, 10.0)).has_crossover());
    CHECK_THROWS_AS(control::margins(tiny, {5.0}), ValidationError);
    CHECK_THROWS_AS(control::margins(tiny, {5.0, 4.0}), ValidationError);
}

TEST_CASE("designed loop meets the target margin on the reference subject") {
    const auto cfg = nominal();
    const auto d = control::design_controller(cfg, 10.0);
    CHECK(d.f == Approx(0.09202806209487772).epsilon(1e-12));
    CHECK(d.omega_c == Approx(5.6059761016914305).epsilon(1e-12));
    CHECK(d.k_f == Approx(0.32697912661454376).epsilon(1e-12));
    CHECK(d.cascade_n == 9);

    const auto rep = control::margins(control::ideal_loop(d), control::margin_grid(cfg));
    REQUIRE(rep.has_crossover());
    CHECK(rep.omega_crossover() == Approx(d.omega_c).epsilon(1e-3));
    CHECK(rep.phase_margin_deg() == Approx(96.5777774270689).margin(0.02));
    CHECK(rep.phase_margin_deg() >= d.phi_deg);

    // the realized cascade stays close to the ideal element
    const auto cascade = control::make_cascade(d);
    const auto rep2 = control::margins(control::cascade_loop(d, cascade), control::margin_grid(cfg));
    REQUIRE(rep2.has_crossover());
    CHECK(rep2.phase_margin_deg() == Approx(rep.phase_margin_deg()).margin(3.0));

    CHECK_THROWS_AS(control::design_controller(cfg, 30.0), ValidationError);  // atan(0.5) = 26.6
    control::DesignOptions bad;
    bad.f = 0.5;
    CHECK_THROWS_AS(control::design_controller(cfg, 10.0, bad), ValidationError);
}

TEST_CASE("uncompensated plant crosses unity beyond the SEA bandwidth") {
    const auto cfg = nominal();
    const control::LoopFn plant_only = [cfg](double w) { return control::eval_plant(cfg, w); };
    const auto grid = control::log_grid(control::omega_he(cfg) / 10.0, 100.0 * cfg.omega_sea);
    const auto rep = control::margins(plant_only, grid);
    REQUIRE(rep.has_crossover());
    CHECK(rep.omega_crossover() == Approx(95.23388205641797).epsilon(1e-3));
    CHECK(rep.omega_crossover() > cfg.omega_sea);
    CHECK(rep.phase_margin_deg() == Approx(49.368055057273466).margin(0.05));
    // far below what the designed loop achieves: the plant alone wastes
    // the hysteretic phase budget on the SEA roll-off
    CHECK(rep.phase_margin_deg() < 60.0);
}

TEST_CASE("margins collapse as the hysteresis ratio vanishes") {
    auto cfg = nominal();
    std::vector<double> pm;
    const std::vector<double> cs{0.5, 0.2, 0.05, 0.02};
    const std::vector<double> expected{95.56253510363058, 51.00245762617425,
                                       10.429453475674677, 1.130426380385643};
    for (std::size_t i = 0; i < cs.size(); ++i) {
        cfg.model.c_h = cs[i];
        const double phi = 0.3 * std::atan(cs[i]) * 180.0 / M_PI;
        const auto d = control::design_controller(cfg, phi);
        const auto rep = control::margins(control::ideal_loop(d), control::margin_grid(cfg));
        REQUIRE(rep.has_crossover());
        pm.push_back(rep.phase_margin_deg());
        CHECK(pm.back() == Approx(expected[i]).margin(0.05));
        CHECK(pm.back() >= phi);  // the guarantee holds even as it thins
    }
    for (std::size_t i = 1; i < pm.size(); ++i) CHECK(pm[i] < pm[i - 1]);
    CHECK(pm.back() < 5.0);
}

TEST_CASE("amplification ratio phase never drops below atan(c_h) - 180") {
    std::mt19937_64 eng(7);
    auto uni = [&eng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(eng() >> 11) * 0x1.0p-53);
    };
    for (int trial = 0; trial < 100; ++trial) {
        control::PlantConfig cfg;
        cfg.model.K_h = uni(5.0, 60.0);
        cfg.model.c_h = uni(0.05, 1.5);
        cfg.model.M_h = uni(0.05, 1.5);
        cfg.M_e = uni(0.0, 3.0);
        cfg.alpha = uni(1.0, 10.0);
        const double floor_deg = std::atan(cfg.model.c_h) * 180.0 / M_PI - 180.0;
        for (double w : control::log_grid(1e-3, 1e4, 40)) {
            const double ph =
                std::arg(control::augmentation_error_ratio(cfg, w)) * 180.0 / M_PI;
            REQUIRE(ph >= floor_deg - 1e-9);
        }
    }
}

TEST_CASE("conservative crossover placement guarantees the margin") {
    std::mt19937_64 eng(42);
    auto uni = [&eng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(eng() >> 11) * 0x1.0p-53);
    };
    int asserted = 0;
    for (int trial = 0; trial < 400; ++trial) {
        control::PlantConfig cfg;
        cfg.model.c_h = uni(0.4, 1.5);
        const double atan_c = std::atan(cfg.model.c_h) * 180.0 / M_PI;
        const double phi = uni(0.15, 0.6) * atan_c;
        cfg.model.K_h = uni(8.0, 50.0);
        cfg.model.M_h = uni(0.05, 0.3);
        cfg.M_e = cfg.model.M_h * uni(10.0, 30.0);
        cfg.alpha = uni(10.0, 25.0);
        const double whe = control::omega_he(cfg);
        const double whea = control::omega_he_alpha(cfg);
        cfg.omega_sea = 10.0 * whea * uni(1.0, 2.0);
        cfg.zeta_sea = 0.5;

        const double f = (atan_c - phi) / 180.0;
        const double hi_c = whea / 3.0 * 0.999;
        if (whe >= hi_c) continue;
        const double wc = std::sqrt(whe * hi_c);

        control::DesignSpec d;
        d.plant = cfg;
        d.f = f;
        d.k_f = control::tune_gain(cfg, f, wc);
        const auto rep = control::margins(control::ideal_loop(d), control::margin_grid(cfg));
        if (!rep.has_crossover()) continue;
        if (rep.omega_crossover() > whea / 3.0) continue;
        ++asserted;
        REQUIRE(rep.phase_margin_deg() >= phi - 1e-6);
    }
    CHECK(asserted >= 50);
}

TEST_CASE("robustness sweep over the published stiffness span") {
    const auto cfg = nominal();
    const auto d = control::design_controller(cfg, 10.0);
    std::vector<double> K_grid;
    for (int i = 0; i < 25; ++i) K_grid.push_back(10.0 + (48.6 - 10.0) * i / 24.0);
    const auto sweep = control::robustness_sweep(d, K_grid, cfg.model.c_h, cfg.model.M_h,
                                                 cfg.M_e, cfg.alpha);
    REQUIRE(sweep.any_crossover);
    REQUIRE(sweep.entries.size() == 25);
    CHECK(sweep.min_margin_deg == Approx(94.38577583825979).margin(0.02));
    CHECK(sweep.worst_K == Approx(48.6));
    CHECK(sweep.min_margin_deg > 0.0);
    CHECK_THROWS_AS(control::robustness_sweep(d, {}, 0.5, 0.3, 0.6, 4.0), ValidationError);
}
