#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dynstiff/identify.hpp"
#include "dynstiff/types.hpp"

namespace dynstiff::stats {

namespace detail {

// Continued-fraction kernel of the regularized incomplete beta function
// (modified Lentz iteration).
inline double beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericalError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw ValidationError("incomplete beta: shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
    return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// CDF of the F distribution with (d1, d2) degrees of freedom.
inline double f_cdf(double x, double d1, double d2) {
    if (x <= 0.0) return 0.0;
    return regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2));
}

/// Residual square sum of data against a model, summed over the data grid:
/// sum_k |S_k - model(j w_k)|^2.
inline double rss(const FrequencyResponse& data, const identify::ModelParams& params) {
    double sum = 0.0;
    for (const auto& s : data.samples)
        sum += std::norm(s.value - identify::eval_stiffness(params, s.omega));
    return sum;
}

/// Residual square sum between two sampled responses on the same grid.
inline double rss(const FrequencyResponse& data, const FrequencyResponse& model) {
    if (data.samples.size() != model.samples.size())
        throw ValidationError("rss: frequency grids differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (data.samples[i].omega != model.samples[i].omega)
            throw ValidationError("rss: frequency grids do not match");
        sum += std::norm(data.samples[i].value - model.samples[i].value);
    }
    return sum;
}

/// F statistic for one extra parameter on complex data:
/// F = ((rss_reduced - rss_full)/rss_full) * (2n - 4).
/// Each of the n complex samples contributes two real observations and
/// the full model has four parameters, so the residual df is 2n - 4.
inline double f_statistic(double rss_reduced, double rss_full, int n) {
    if (n < 3) throw ValidationError("f_statistic: need at least 3 complex samples");
    if (rss_full < 0.0 || rss_reduced < 0.0)
        throw ValidationError("f_statistic: negative residual sum");
    if (rss_full == 0.0) throw NumericalError("f_statistic: full model fits perfectly (degenerate)");
    return (rss_reduced - rss_full) / rss_full * (2.0 * n - 4.0);
}

/// Upper p quantile of F(1, 2n-4): the rejection threshold matching
/// f_statistic. Inverted by bisection on the CDF to 1e-6 relative.
inline double f_critical(int n, double p_false_reject = 0.05) {
    if (n < 3) throw ValidationError("f_critical: need n >= 3");
    if (!(p_false_reject > 0.0) || !(p_false_reject < 1.0))
        throw ValidationError("f_critical: false-rejection probability must lie in (0, 1)");
    const double d1 = 1.0;
    const double d2 = 2.0 * n - 4.0;
    const double target = 1.0 - p_false_reject;
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (f_cdf(hi, d1, d2) < target) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 400) throw NumericalError("f_critical: quantile bracket overflow");
    }
    while (hi - lo > 1e-6 * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        (f_cdf(mid, d1, d2) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Model-comparison result at a fixed false-rejection probability.
struct FTestReport {
    std::string exp_label;
    std::string comparison;  // "M1-M3" or "M2-M3"
    double rss_reduced = 0.0;
    double rss_full = 0.0;
    int n = 0;
    double f_stat = 0.0;
    double f_critical = 0.0;
    bool significant = false;
};

inline FTestReport f_test(double rss_reduced, double rss_full, int n,
                          double p_false_reject = 0.05) {
    FTestReport r;
    r.rss_reduced = rss_reduced;
    r.rss_full = rss_full;
    r.n = n;
    r.f_stat = f_statistic(rss_reduced, rss_full, n);
    r.f_critical = f_critical(n, p_false_reject);
    r.significant = r.f_stat > r.f_critical;
    return r;
}

/// Straight-line regression summary for C_h against K_h.
struct RegressionReport {
    double c_h = 0.0;       // slope, dimensionless
    double d_h = 0.0;       // intercept, N*m/rad
    double r_squared = 0.0;
};

/// OLS of C_h on K_h with intercept, plus coefficient of determination.
inline RegressionReport regress_ch_kh(const std::vector<double>& K_h,
                                      const std::vector<double>& C_h) {
    if (K_h.size() != C_h.size()) throw ValidationError("regress_ch_kh: column length mismatch");
    if (K_h.size() < 2) throw ValidationError("regress_ch_kh: need at least 2 pairs");
    identify::detail::Line line;
    try {
        line = identify::detail::ols_line(K_h, C_h);
    } catch (const NumericalError&) {
        throw NumericalError("regress_ch_kh: all K_h values coincide");
    }
    double mean_c = 0.0;
    for (double c : C_h) mean_c += c;
    mean_c /= static_cast<double>(C_h.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < K_h.size(); ++i) {
        const double fit = line.intercept + line.slope * K_h[i];
        ss_res += (C_h[i] - fit) * (C_h[i] - fit);
        ss_tot += (C_h[i] - mean_c) * (C_h[i] - mean_c);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return {line.slope, line.intercept, r2};
}

/// Is damping ratio proportional to natural frequency (a viscous
/// signature, zeta = a_h/2 * omega), or simply constant across subjects?
/// Compares residuals of the two one-parameter fits.
struct ViscousHypothesisReport {
    double a_h = 0.0;              // proportional fit: zeta = (a_h/2) * omega
    double rss_proportional = 0.0;
    double const_zeta = 0.0;       // constant fit
    double rss_constant = 0.0;
    bool proportional_rejected = false;
};

inline ViscousHypothesisReport viscous_hypothesis_check(const std::vector<double>& omega_n,
                                                        const std::vector<double>& zeta) {
    if (omega_n.size() != zeta.size())
        throw ValidationError("viscous_hypothesis_check: column length mismatch");
    if (omega_n.size() < 3) throw ValidationError("viscous_hypothesis_check: need at least 3 rows");
    double sxy = 0, sxx = 0, sum = 0;
    for (std::size_t i = 0; i < omega_n.size(); ++i) {
        sxy += omega_n[i] * zeta[i];
        sxx += omega_n[i] * omega_n[i];
        sum += zeta[i];
    }
    ViscousHypothesisReport r;
    const double slope = sxy / sxx;  // through-origin least squares
    r.a_h = 2.0 * slope;
    r.const_zeta = sum / static_cast<double>(zeta.size());
    for (std::size_t i = 0; i < omega_n.size(); ++i) {
        const double ep = zeta[i] - slope * omega_n[i];
        const double ec = zeta[i] - r.const_zeta;
        r.rss_proportional += ep * ep;
        r.rss_constant += ec * ec;
    }
    r.proportional_rejected = r.rss_constant < r.rss_proportional;
    return r;
}

/// Phase of the stiffness at vanishing inertia influence, in degrees.
/// For the hysteretic model this is frequency independent.
inline double phase_shift_low_freq(const identify::ModelParamsM2& p) {
    if (!(p.K_h > 0.0)) throw ValidationError("phase_shift_low_freq: K_h must be positive");
    return std::atan2(p.C_h, p.K_h) * 180.0 / M_PI;
}

inline double phase_shift_low_freq(const identify::ModelParamsM3& p, double omega) {
    if (!(p.K_h > 0.0)) throw ValidationError("phase_shift_low_freq: K_h must be positive");
    return std::atan2(p.C_h + p.B_h * omega, p.K_h) * 180.0 / M_PI;
}

}  // namespace dynstiff::stats
