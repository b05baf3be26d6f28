#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "dynstiff/types.hpp"

namespace dynstiff::control {

using cplx = std::complex<double>;

/// One-parameter complex-stiffness subject model: S_h(jw) = K_h(1 + c_h j) - M_h w^2.
struct OneParamModel {
    double K_h = 0.0;  // N*m/rad
    double c_h = 0.0;  // hysteresis ratio, dimensionless
    double M_h = 0.0;  // kg*m^2
};

inline void validate(const OneParamModel& m) {
    if (!(m.K_h > 0.0)) throw ValidationError("OneParamModel: K_h must be positive");
    if (m.c_h < 0.0) throw ValidationError("OneParamModel: c_h must be non-negative");
    if (!(m.M_h > 0.0)) throw ValidationError("OneParamModel: M_h must be positive");
}

/// Augmentation plant configuration. The series elastic actuator is a
/// second-order low pass with bandwidth omega_sea; zeta_sea = 0.5 keeps
/// its passband flat enough that the mid-band plateau of the plant is
/// preserved (see eval_plant).
struct PlantConfig {
    OneParamModel model;
    double M_e = 0.0;       // exoskeleton inertia, kg*m^2
    double alpha = 1.0;     // amplification factor
    double omega_sea = 2.0 * M_PI * 10.0;  // rad/s
    double zeta_sea = 0.5;
};

/// Natural frequency of the coupled human+exoskeleton stiffness.
inline double omega_he(const PlantConfig& cfg) {
    return std::sqrt(cfg.model.K_h / (cfg.model.M_h + cfg.M_e));
}

/// Natural frequency with the exoskeleton inertia attenuated by alpha.
inline double omega_he_alpha(const PlantConfig& cfg) {
    return std::sqrt(cfg.model.K_h / (cfg.model.M_h + cfg.M_e / cfg.alpha));
}

inline void validate(const PlantConfig& cfg) {
    validate(cfg.model);
    if (!(cfg.alpha >= 1.0)) throw ValidationError("PlantConfig: alpha must be >= 1");
    if (cfg.M_e < 0.0) throw ValidationError("PlantConfig: M_e must be non-negative");
    if (!(cfg.zeta_sea > 0.0)) throw ValidationError("PlantConfig: zeta_sea must be positive");
    if (!(cfg.omega_sea > omega_he_alpha(cfg)))
        throw ValidationError("PlantConfig: omega_sea must exceed both coupled resonances");
}

/// Coupled stiffness with attenuated exoskeleton inertia, at s = jw.
inline cplx stiffness_he_alpha(const PlantConfig& cfg, double omega) {
    return {cfg.model.K_h - (cfg.model.M_h + cfg.M_e / cfg.alpha) * omega * omega,
            cfg.model.K_h * cfg.model.c_h};
}

/// Coupled stiffness with the full exoskeleton inertia, at s = jw.
inline cplx stiffness_he(const PlantConfig& cfg, double omega) {
    return {cfg.model.K_h - (cfg.model.M_h + cfg.M_e) * omega * omega,
            cfg.model.K_h * cfg.model.c_h};
}

/// SEA force-control stage, a unity-DC-gain second-order low pass.
inline cplx eval_sea(const PlantConfig& cfg, double omega) {
    const double ws = cfg.omega_sea;
    return ws * ws / cplx{ws * ws - omega * omega, 2.0 * cfg.zeta_sea * ws * omega};
}

/// Torque amplification error ratio alpha*S_he_alpha/S_he: how the
/// commanded amplified torque maps to the torque the joint actually
/// sees. Tends to alpha at low frequency and to the inertia ratio
/// alpha*(M_h + M_e/alpha)/(M_h + M_e) at high frequency.
inline cplx augmentation_error_ratio(const PlantConfig& cfg, double omega) {
    return cfg.alpha * stiffness_he_alpha(cfg, omega) / stiffness_he(cfg, omega);
}

/// Full augmentation plant P_alpha(jw) = alpha*S_he_alpha/S_he * G_sea.
/// For c_h > 0 the denominator never vanishes on the jw axis.
inline cplx eval_plant(const PlantConfig& cfg, double omega) {
    return augmentation_error_ratio(cfg, omega) * eval_sea(cfg, omega);
}

/// Rational transfer function in root form: H(s) = gain * prod(s - z) / prod(s - p).
struct RationalTF {
    double gain = 1.0;
    std::vector<cplx> zeros;
    std::vector<cplx> poles;

    cplx eval(cplx s) const {
        // Interleave factors so intermediate magnitudes stay moderate.
        cplx acc = gain;
        const std::size_t common = std::min(zeros.size(), poles.size());
        for (std::size_t i = 0; i < common; ++i) acc *= (s - zeros[i]) / (s - poles[i]);
        for (std::size_t i = common; i < zeros.size(); ++i) acc *= s - zeros[i];
        for (std::size_t i = common; i < poles.size(); ++i) acc /= s - poles[i];
        return acc;
    }
};

/// The SEA stage as a RationalTF (complex pole pair, DC gain one).
inline RationalTF sea_lowpass(double omega_sea, double zeta_sea) {
    if (!(omega_sea > 0.0) || !(zeta_sea > 0.0))
        throw ValidationError("sea_lowpass: omega_sea and zeta_sea must be positive");
    RationalTF tf;
    tf.gain = omega_sea * omega_sea;
    const double re = -zeta_sea * omega_sea;
    if (zeta_sea < 1.0) {
        const double im = omega_sea * std::sqrt(1.0 - zeta_sea * zeta_sea);
        tf.poles = {{re, im}, {re, -im}};
    } else {
        const double d = omega_sea * std::sqrt(zeta_sea * zeta_sea - 1.0);
        tf.poles = {{re + d, 0.0}, {re - d, 0.0}};
    }
    return tf;
}

/// Admissible fractional orders for a phase-margin target phi:
/// 0 < 90 f < atan(c_h) - phi. selected is the interval midpoint.
struct OrderInterval {
    double lo = 0.0;
    double hi = 0.0;
    double selected = 0.0;
};

inline OrderInterval choose_fractional_order(double c_h, double phi_deg) {
    if (!(c_h > 0.0)) throw ValidationError("choose_fractional_order: c_h must be positive");
    if (phi_deg < 0.0) throw ValidationError("choose_fractional_order: phi must be non-negative");
    const double atan_ch_deg = std::atan(c_h) * 180.0 / M_PI;
    if (!(phi_deg < atan_ch_deg))
        throw ValidationError(
            "choose_fractional_order: infeasible margin target; admissible interval is 0 <= phi < " +
            std::to_string(atan_ch_deg) + " deg (atan of the hysteresis ratio)");
    OrderInterval iv;
    iv.lo = 0.0;
    iv.hi = (atan_ch_deg - phi_deg) / 90.0;
    iv.selected = 0.5 * iv.hi;
    return iv;
}

/// Ideal fractional element C(jw) = k_f * w^-f * e^{-j pi f / 2}:
/// constant -20 f dB/decade magnitude slope and constant -90 f deg phase.
inline cplx eval_fractional(double k_f, double f, double omega) {
    return std::polar(k_f * std::pow(omega, -f), -M_PI_2 * f);
}

/// Gain placing the loop crossover at omega_c: k_f = omega_c^f / |P(j omega_c)|.
/// omega_c must sit between the two coupled resonances, where the plant
/// phase guarantee applies.
inline double tune_gain(const PlantConfig& cfg, double f, double omega_c) {
    validate(cfg);
    const double lo = omega_he(cfg), hi = omega_he_alpha(cfg);
    if (!(omega_c > lo) || !(omega_c < hi))
        throw ValidationError("tune_gain: omega_c must lie between the coupled resonances (" +
                              std::to_string(lo) + ", " + std::to_string(hi) + ") rad/s");
    return std::pow(omega_c, f) / std::abs(eval_plant(cfg, omega_c));
}

/// Log-spaced frequency grid, endpoints included.
inline std::vector<double> log_grid(double lo, double hi, int points_per_decade = 400) {
    if (!(lo > 0.0) || !(hi > lo)) throw ValidationError("log_grid: need 0 < lo < hi");
    if (points_per_decade < 1) throw ValidationError("log_grid: points_per_decade must be >= 1");
    const double decades = std::log10(hi / lo);
    const int n = std::max(2, static_cast<int>(std::ceil(decades * points_per_decade)) + 1);
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return g;
}

namespace detail {

// Half the peak-to-peak phase variation of tf over the central third of
// the log band (in decades). Measures pole/zero graininess, not the
// irreducible finite-band truncation bias.
inline double cascade_phase_ripple(const RationalTF& tf, double w_lo, double w_hi) {
    const double span = std::log10(w_hi / w_lo);
    const double guard = span / 6.0;
    const double lo = w_lo * std::pow(10.0, guard);
    const double hi = w_hi * std::pow(10.0, -guard);
    double mn = 1e300, mx = -1e300;
    for (double w : log_grid(lo, hi, 50)) {
        const double ph = std::arg(tf.eval({0.0, w}));
        mn = std::min(mn, ph);
        mx = std::max(mx, ph);
    }
    return 0.5 * (mx - mn) * 180.0 / M_PI;
}

}  // namespace detail

/// Cascade of n first-order lag sections approximating s^-f over
/// [w_lo, w_hi]: poles p_i = w_lo * r_pp^(i-1), zeros z_i = r_zp * p_i,
/// with r_pp = (w_hi/w_lo)^(1/(n-1+f)) so the last zero lands on w_hi,
/// and r_zp = r_pp^f. A static factor 1/w_lo^f matches the fractional
/// magnitude at the low band edge. All poles and zeros are strictly
/// negative real, so the cascade is stable and minimum phase.
///
/// Throws when n is too small to hold the mid-band phase ripple within
/// ripple_tol_deg; the message names the smallest sufficient n.
inline RationalTF lag_cascade(double f, double w_lo, double w_hi, int n,
                              double ripple_tol_deg = 3.0) {
    if (!(f > 0.0) || !(f < 1.0)) throw ValidationError("lag_cascade: need 0 < f < 1");
    if (!(w_lo > 0.0) || !(w_lo < w_hi)) throw ValidationError("lag_cascade: need 0 < w_lo < w_hi");
    if (n < 1) throw ValidationError("lag_cascade: need n >= 1");

    const auto build = [&](int sections) {
        const double r_pp = std::pow(w_hi / w_lo, 1.0 / (sections - 1 + f));
        const double r_zp = std::pow(r_pp, f);
        RationalTF tf;
        double gain = 1.0 / std::pow(w_lo, f);
        for (int i = 0; i < sections; ++i) {
            const double p = w_lo * std::pow(r_pp, i);
            const double z = r_zp * p;
            tf.poles.push_back({-p, 0.0});
            tf.zeros.push_back({-z, 0.0});
            gain *= p / z;  // each section is (1 + s/z)/(1 + s/p) = (p/z)(s + z)/(s + p)
        }
        tf.gain = gain;
        return tf;
    };

    RationalTF tf = build(n);
    if (detail::cascade_phase_ripple(tf, w_lo, w_hi) > ripple_tol_deg) {
        int need = n;
        while (need < 512 &&
               detail::cascade_phase_ripple(build(++need), w_lo, w_hi) > ripple_tol_deg) {}
        throw NumericalError("lag_cascade: n too small for the requested band, phase ripple exceeds " +
                             std::to_string(ripple_tol_deg) + " deg; need n >= " +
                             std::to_string(need));
    }
    return tf;
}

inline double cascade_r_pp(double f, double w_lo, double w_hi, int n) {
    return std::pow(w_hi / w_lo, 1.0 / (n - 1 + f));
}

using LoopFn = std::function<cplx(double)>;

/// One unity-gain crossing of the loop transfer function.
struct Crossing {
    double omega = 0.0;
    double phase_deg = 0.0;   // continuously unwrapped along the grid
    double margin_deg = 0.0;  // 180 + phase
};

/// Stability margins of a loop evaluated on a log grid. The phase is
/// unwrapped along the grid, so the grid must start well below the first
/// crossover (where the loop phase is inside (-180, 180)).
struct MarginReport {
    std::vector<Crossing> all_crossings;  // ascending in omega
    bool has_crossover() const { return !all_crossings.empty(); }
    double omega_crossover() const { return all_crossings.front().omega; }
    double phase_margin_deg() const { return all_crossings.front().margin_deg; }
};

/// Locate every |L(jw)| = 1 crossing by sign changes of log|L| between
/// grid points, refined by bisection in log frequency to 1e-4 relative.
inline MarginReport margins(const LoopFn& loop, const std::vector<double>& grid) {
    if (grid.size() < 2) throw ValidationError("margins: grid needs at least 2 points");
    const std::size_t n = grid.size();
    std::vector<double> lm(n), ph(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw ValidationError("margins: grid must be strictly increasing");
        const cplx v = loop(grid[i]);
        lm[i] = std::log(std::abs(v));
        const double raw = std::arg(v);
        if (i == 0) {
            ph[i] = raw;
        } else {
            double d = raw - std::fmod(ph[i - 1], 2.0 * M_PI);
            d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
            ph[i] = ph[i - 1] + d;
        }
    }

    MarginReport report;
    const auto push = [&report](double w, double phase_rad) {
        const double deg = phase_rad * 180.0 / M_PI;
        report.all_crossings.push_back({w, deg, 180.0 + deg});
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (lm[i] == 0.0) {
            push(grid[i], ph[i]);
            continue;
        }
        if (lm[i] * lm[i + 1] >= 0.0) continue;
        double a = grid[i], b = grid[i + 1];
        double fa = lm[i];
        for (int it = 0; it < 200 && (b - a) > 1e-4 * a; ++it) {
            const double m = std::sqrt(a * b);
            const double fm = std::log(std::abs(loop(m)));
            if (fm == 0.0) {
                a = b = m;
                break;
            }
            if ((fm > 0.0) == (fa > 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        const double wc = std::sqrt(a * b);
        // Re-anchor the principal phase at wc to the unwrapped neighbor.
        const double raw = std::arg(loop(wc));
        const double k = std::round((ph[i] - raw) / (2.0 * M_PI));
        push(wc, raw + 2.0 * M_PI * k);
    }
    if (lm[n - 1] == 0.0) push(grid[n - 1], ph[n - 1]);
    return report;
}

/// Complete controller synthesis record.
struct DesignSpec {
    PlantConfig plant;
    double phi_deg = 0.0;  // target phase margin
    double f = 0.0;        // fractional order
    double k_f = 0.0;      // controller gain, (rad/s)^f
    double omega_c = 0.0;  // intended crossover
    // lag-cascade realization
    int cascade_n = 0;
    double cascade_w_lo = 0.0;
    double cascade_w_hi = 0.0;
    double r_pp = 0.0;
    double r_zp = 0.0;
};

/// Loop transfer function with the ideal fractional element.
inline LoopFn ideal_loop(const DesignSpec& d) {
    return [d](double w) { return eval_fractional(d.k_f, d.f, w) * eval_plant(d.plant, w); };
}

/// Loop transfer function with the lag-cascade realization.
inline LoopFn cascade_loop(const DesignSpec& d, const RationalTF& cascade) {
    return [d, cascade](double w) { return d.k_f * cascade.eval({0.0, w}) * eval_plant(d.plant, w); };
}

/// Grid covering everything margins() needs for this plant.
inline std::vector<double> margin_grid(const PlantConfig& cfg, int points_per_decade = 400) {
    return log_grid(omega_he(cfg) / 10.0, 10.0 * cfg.omega_sea, points_per_decade);
}

/// Synthesize a fractional-order amplification controller:
/// order f from the admissible interval (midpoint unless overridden),
/// crossover at the geometric mean of the coupled resonances (unless
/// overridden), gain from tune_gain, cascade spanning
/// [omega_he/10, 10*omega_he_alpha].
struct DesignOptions {
    std::optional<double> f;
    std::optional<double> omega_c;
    std::optional<int> cascade_n;
    std::optional<double> cascade_w_lo;
    std::optional<double> cascade_w_hi;
    double ripple_tol_deg = 3.0;
};

inline DesignSpec design_controller(const PlantConfig& cfg, double phi_deg,
                                    const DesignOptions& opt = {}) {
    validate(cfg);
    DesignSpec d;
    d.plant = cfg;
    d.phi_deg = phi_deg;
    const auto interval = choose_fractional_order(cfg.model.c_h, phi_deg);
    d.f = opt.f.value_or(interval.selected);
    if (!(d.f > interval.lo && d.f < interval.hi))
        throw ValidationError("design_controller: fractional order outside the admissible interval");
    d.omega_c = opt.omega_c.value_or(std::sqrt(omega_he(cfg) * omega_he_alpha(cfg)));
    d.k_f = tune_gain(cfg, d.f, d.omega_c);
    d.cascade_w_lo = opt.cascade_w_lo.value_or(omega_he(cfg) / 10.0);
    d.cascade_w_hi = opt.cascade_w_hi.value_or(10.0 * omega_he_alpha(cfg));
    const double decades = std::log10(d.cascade_w_hi / d.cascade_w_lo);
    d.cascade_n = opt.cascade_n.value_or(std::max(6, static_cast<int>(std::ceil(4.0 * decades))));
    d.r_pp = cascade_r_pp(d.f, d.cascade_w_lo, d.cascade_w_hi, d.cascade_n);
    d.r_zp = std::pow(d.r_pp, d.f);
    // Construction doubles as the ripple feasibility check.
    (void)lag_cascade(d.f, d.cascade_w_lo, d.cascade_w_hi, d.cascade_n, opt.ripple_tol_deg);
    return d;
}

inline RationalTF make_cascade(const DesignSpec& d, double ripple_tol_deg = 3.0) {
    return lag_cascade(d.f, d.cascade_w_lo, d.cascade_w_hi, d.cascade_n, ripple_tol_deg);
}

/// Margin of one plant variant under a fixed controller.
struct SweepEntry {
    double K_h = 0.0;
    bool has_crossover = false;
    double margin_deg = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    double min_margin_deg = 0.0;
    double worst_K = 0.0;
    bool any_crossover = false;
};

/// Evaluate the designed (ideal fractional) controller against a grid of
/// stiffness values with the other subject constants replaced as given.
/// Returns the worst lowest-crossover margin and where it occurs.
inline SweepResult robustness_sweep(const DesignSpec& design, const std::vector<double>& K_grid,
                                    double c_h, double M_h, double M_e, double alpha) {
    if (K_grid.empty()) throw ValidationError("robustness_sweep: empty stiffness grid");
    SweepResult result;
    result.min_margin_deg = 1e300;
    for (double K : K_grid) {
        PlantConfig cfg = design.plant;
        cfg.model = {K, c_h, M_h};
        cfg.M_e = M_e;
        cfg.alpha = alpha;
        validate(cfg);
        DesignSpec variant = design;
        variant.plant = cfg;
        const auto rep = margins(ideal_loop(variant), margin_grid(cfg));
        SweepEntry e{K, rep.has_crossover(), rep.has_crossover() ? rep.phase_margin_deg() : 0.0};
        if (e.has_crossover && e.margin_deg < result.min_margin_deg) {
            result.min_margin_deg = e.margin_deg;
            result.worst_K = K;
            result.any_crossover = true;
        }
        result.entries.push_back(e);
    }
    if (!result.any_crossover) result.min_margin_deg = 0.0;
    return result;
}

}  // namespace dynstiff::control
