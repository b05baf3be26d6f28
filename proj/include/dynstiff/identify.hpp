#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <variant>

#include "dynstiff/types.hpp"

namespace dynstiff::identify {

/// Spring + viscous damper + inertia: S(jw) = K_h - M w^2 + j B_h w.
struct ModelParamsM1 {
    double K_h = 0.0;  // N*m/rad
    double B_h = 0.0;  // N*m*s/rad, sign unconstrained
    double M = 0.0;    // kg*m^2, lumped inertia seen at the joint
};

/// Spring + hysteretic (structural) damper + inertia:
/// S(jw) = K_h - M w^2 + j C_h. The imaginary part is frequency
/// independent, the defining property of complex stiffness.
struct ModelParamsM2 {
    double K_h = 0.0;
    double C_h = 0.0;  // N*m/rad
    double M = 0.0;
};

/// Both damping mechanisms: S(jw) = K_h - M w^2 + j (C_h + B_h w).
struct ModelParamsM3 {
    double K_h = 0.0;
    double C_h = 0.0;
    double B_h = 0.0;
    double M = 0.0;
};

using ModelParams = std::variant<ModelParamsM1, ModelParamsM2, ModelParamsM3>;

inline const char* model_code(const ModelParamsM1&) { return "M1"; }
inline const char* model_code(const ModelParamsM2&) { return "M2"; }
inline const char* model_code(const ModelParamsM3&) { return "M3"; }
inline const char* model_code(const ModelParams& p) {
    return std::visit([](const auto& m) { return model_code(m); }, p);
}

inline std::complex<double> eval_stiffness(const ModelParamsM1& p, double omega) {
    return {p.K_h - p.M * omega * omega, p.B_h * omega};
}
inline std::complex<double> eval_stiffness(const ModelParamsM2& p, double omega) {
    return {p.K_h - p.M * omega * omega, p.C_h};
}
inline std::complex<double> eval_stiffness(const ModelParamsM3& p, double omega) {
    return {p.K_h - p.M * omega * omega, p.C_h + p.B_h * omega};
}
inline std::complex<double> eval_stiffness(const ModelParams& p, double omega) {
    return std::visit([omega](const auto& m) { return eval_stiffness(m, omega); }, p);
}

/// Evaluate a model on a frequency grid.
inline FrequencyResponse eval_on_grid(const ModelParams& p, const std::vector<double>& omegas) {
    FrequencyResponse frf;
    frf.samples.reserve(omegas.size());
    for (double w : omegas) frf.samples.push_back({w, eval_stiffness(p, w)});
    return frf;
}

/// Fold the attenuated exoskeleton inertia into raw torque/angle ratios:
/// value' = value + (M_e/alpha)*(jw)^2, i.e. the real part drops by
/// (M_e/alpha)*w^2. Desensitizes the later fit to errors far above the
/// subject's natural frequency.
inline FrequencyResponse compensate_inertia(FrequencyResponse frf, const ExperimentConfig& cfg) {
    validate(cfg);
    for (auto& s : frf.samples)
        s.value -= std::complex<double>{cfg.M_e / cfg.alpha * s.omega * s.omega, 0.0};
    frf.alpha = cfg.alpha;
    frf.M_e = cfg.M_e;
    if (!cfg.label.empty()) frf.exp_label = cfg.label;
    return frf;
}

/// Real-part regression shared by all three models.
struct RealPartFit {
    double K_h = 0.0;
    double M = 0.0;
};

namespace detail {

// Ordinary least squares y ~ a + b*x. Returns {a, b}.
struct Line {
    double intercept;
    double slope;
};

inline Line ols_line(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, v * v);
    if (std::fabs(det) <= 1e-12 * std::max(1.0, n * scale))
        throw NumericalError("regression is rank deficient: all abscissae coincide");
    return {(sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

inline void require_samples(const FrequencyResponse& frf, std::size_t min_n) {
    if (frf.samples.size() < min_n)
        throw ValidationError("fit: not enough frequency samples");
}

}  // namespace detail

/// OLS of Re S_k against [1, -w_k^2]. The coefficients are (K_h, M).
/// Every model fit reuses this result, so K_h and M agree bit for bit
/// across M1/M2/M3 on the same data.
inline RealPartFit fit_real_part(const FrequencyResponse& frf) {
    detail::require_samples(frf, 2);
    std::vector<double> x, y;
    x.reserve(frf.samples.size());
    y.reserve(frf.samples.size());
    for (const auto& s : frf.samples) {
        x.push_back(-s.omega * s.omega);
        y.push_back(s.value.real());
    }
    const auto line = detail::ols_line(x, y);
    RealPartFit fit{line.intercept, line.slope};
    if (!(fit.K_h > 0.0)) throw NumericalError("fit_real_part: non-positive stiffness estimate");
    if (!(fit.M > 0.0)) throw NumericalError("fit_real_part: non-positive inertia estimate");
    return fit;
}

inline ModelParamsM1 fit_m1(const FrequencyResponse& frf) {
    const auto re = fit_real_part(frf);
    // Im S ~ B*w through the origin.
    double sxy = 0, sxx = 0;
    for (const auto& s : frf.samples) {
        sxy += s.omega * s.value.imag();
        sxx += s.omega * s.omega;
    }
    return {re.K_h, sxy / sxx, re.M};
}

inline ModelParamsM2 fit_m2(const FrequencyResponse& frf) {
    const auto re = fit_real_part(frf);
    double sum = 0;
    for (const auto& s : frf.samples) sum += s.value.imag();
    return {re.K_h, sum / static_cast<double>(frf.samples.size()), re.M};
}

inline ModelParamsM3 fit_m3(const FrequencyResponse& frf) {
    detail::require_samples(frf, 2);
    const auto re = fit_real_part(frf);
    std::vector<double> x, y;
    for (const auto& s : frf.samples) {
        x.push_back(s.omega);
        y.push_back(s.value.imag());
    }
    const auto line = detail::ols_line(x, y);
    return {re.K_h, line.intercept, line.slope, re.M};
}

inline double natural_frequency(double K_h, double M) {
    if (!(K_h > 0.0) || !(M > 0.0))
        throw ValidationError("natural_frequency: K_h and M must be positive");
    return std::sqrt(K_h / M);
}

inline double damping_ratio(const ModelParamsM1& p) {
    return p.B_h / (2.0 * std::sqrt(p.K_h * p.M));
}
inline double damping_ratio(const ModelParamsM2& p) { return p.C_h / (2.0 * p.K_h); }
inline double damping_ratio(const ModelParamsM3& p) {
    return p.B_h / (2.0 * std::sqrt(p.K_h * p.M)) + p.C_h / (2.0 * p.K_h);
}
inline double damping_ratio(const ModelParams& p) {
    return std::visit([](const auto& m) { return damping_ratio(m); }, p);
}

inline double stiffness_of(const ModelParams& p) {
    return std::visit([](const auto& m) { return m.K_h; }, p);
}
inline double inertia_of(const ModelParams& p) {
    return std::visit([](const auto& m) { return m.M; }, p);
}

}  // namespace dynstiff::identify
