#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dynstiff/types.hpp"

namespace dynstiff::signal {

/// Chirp phase integral phi(t) = integral of omega(tau) dtau from 0 to t,
/// with omega(t) = omega_min * (omega_max/omega_min)^(t/T).
inline double chirp_phase(const ChirpSpec& spec, double t) {
    const double ratio = spec.omega_max / spec.omega_min;
    if (ratio == 1.0) return spec.omega_min * t;  // degenerate sweep: constant frequency
    const double lr = std::log(ratio);
    return spec.omega_min * spec.duration / lr * (std::pow(ratio, t / spec.duration) - 1.0);
}

/// Instantaneous angular frequency of the sweep at time t.
inline double chirp_frequency(const ChirpSpec& spec, double t) {
    return spec.omega_min * std::pow(spec.omega_max / spec.omega_min, t / spec.duration);
}

/// Exponential chirp u(t) = A*sin(phi(t)), sampled at spec.sample_rate.
inline SampledSignal gen_exp_chirp(const ChirpSpec& spec) {
    validate(spec);
    SampledSignal out;
    out.dt = 1.0 / spec.sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.values[i] = spec.amplitude * std::sin(chirp_phase(spec, static_cast<double>(i) * out.dt));
    return out;
}

/// Frequency assigned to each analysis window: the sweep's instantaneous
/// frequency at the segment start. Geometric progression with ratio
/// (omega_max/omega_min)^(1/n).
inline std::vector<double> segment_frequencies(const ChirpSpec& spec, const SegmentationSpec& seg) {
    validate(spec);
    validate(seg);
    std::vector<double> out(static_cast<std::size_t>(seg.n_segments));
    const double ratio = spec.omega_max / spec.omega_min;
    for (int k = 0; k < seg.n_segments; ++k)
        out[static_cast<std::size_t>(k)] =
            spec.omega_min * std::pow(ratio, static_cast<double>(k) / seg.n_segments);
    return out;
}

/// One analysis window cut from a record.
struct Segment {
    double dt = 0.0;
    std::vector<double> tau_c;
    std::vector<double> theta_e;
};

/// Cut the first used_duration seconds out of each segment_period slot.
inline std::vector<Segment> segment_record(const TimeSeries& record, const SegmentationSpec& seg) {
    validate(record);
    validate(seg);
    const auto n_used = static_cast<std::size_t>(std::llround(seg.used_duration / record.dt));
    if (n_used < 2) throw ValidationError("segment_record: used_duration shorter than two samples");
    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(seg.n_segments));
    for (int k = 0; k < seg.n_segments; ++k) {
        const auto start = static_cast<std::size_t>(std::llround(k * seg.segment_period / record.dt));
        if (start + n_used > record.tau_c.size())
            throw ValidationError("segment_record: record too short for the requested segmentation");
        Segment s;
        s.dt = record.dt;
        s.tau_c.assign(record.tau_c.begin() + static_cast<std::ptrdiff_t>(start),
                       record.tau_c.begin() + static_cast<std::ptrdiff_t>(start + n_used));
        s.theta_e.assign(record.theta_e.begin() + static_cast<std::ptrdiff_t>(start),
                         record.theta_e.begin() + static_cast<std::ptrdiff_t>(start + n_used));
        out.push_back(std::move(s));
    }
    return out;
}

/// True when the discarded tail of each slot allows at least four time
/// constants of settling. Advisory only; callers may warn.
inline bool settling_gap_ok(const SegmentationSpec& seg, double time_constant) {
    return seg.segment_period - seg.used_duration >= 4.0 * time_constant;
}

namespace detail {

// Solve the symmetric 3x3 system G*x = b by Gaussian elimination with
// partial pivoting. G is given row-major.
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> G, std::array<double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(G[r][col]) > std::fabs(G[piv][col])) piv = r;
        if (G[piv][col] == 0.0) throw NumericalError("singular normal equations in sinusoid fit");
        std::swap(G[piv], G[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = G[r][col] / G[col][col];
            for (int c = col; c < 3; ++c) G[r][c] -= f * G[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= G[r][c] * x[c];
        x[r] = s / G[r][r];
    }
    return x;
}

// Phasor X with x(t) ~ mean + Re{X * exp(j*omega*t)}, fitted by least
// squares on the basis {1, cos(omega t), sin(omega t)} over [0, n*dt).
// The DC term absorbs bias offsets so they cannot leak into the phasor.
inline std::complex<double> sinusoid_phasor(std::span<const double> x, double dt, double omega,
                                            std::size_t n) {
    double scc = 0, scs = 0, sss = 0, sc = 0, ss = 0;
    double sxc = 0, sxs = 0, sx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double c = std::cos(omega * t);
        const double s = std::sin(omega * t);
        scc += c * c;
        scs += c * s;
        sss += s * s;
        sc += c;
        ss += s;
        sx += x[i];
        sxc += x[i] * c;
        sxs += x[i] * s;
    }
    const double dn = static_cast<double>(n);
    const auto coef = solve3({{{dn, sc, ss}, {sc, scc, scs}, {ss, scs, sss}}}, {sx, sxc, sxs});
    // x ~ a0 + a*cos + b*sin = a0 + Re{(a - j b) e^{j w t}}
    return {coef[1], -coef[2]};
}

}  // namespace detail

/// Single-frequency FRF sample S = tau_hat / theta_hat at omega.
///
/// Both signals are reduced to complex amplitudes over the same window,
/// truncated to a whole number of periods (floor(omega*T_use/2pi)) so
/// spectral leakage cannot bias steady-state data. The amplitudes come
/// from an exact least-squares projection onto {1, cos, sin}, which
/// recovers noiseless sinusoids to machine precision regardless of how
/// the period aligns with the sample grid.
///
/// floor_rel: minimum angle-phasor magnitude, relative to the angle
/// signal RMS, below which the excitation is deemed insufficient.
inline std::complex<double> estimate_frf_point(std::span<const double> seg_tau,
                                               std::span<const double> seg_theta, double dt,
                                               double omega, double floor_rel = 1e-12) {
    if (!(dt > 0.0)) throw ValidationError("estimate_frf_point: dt must be positive");
    if (!(omega > 0.0)) throw ValidationError("estimate_frf_point: omega must be positive");
    if (!(dt * omega < M_PI)) throw ValidationError("estimate_frf_point: omega beyond Nyquist");
    if (seg_tau.size() != seg_theta.size())
        throw ValidationError("estimate_frf_point: segment columns differ in length");

    const double t_use = static_cast<double>(seg_theta.size()) * dt;
    const double periods = std::floor(omega * t_use / (2.0 * M_PI));
    if (periods < 1.0)
        throw ValidationError("estimate_frf_point: window shorter than one period of omega");
    const double t_win = periods * 2.0 * M_PI / omega;
    const std::size_t n_win =
        std::min(seg_theta.size(), static_cast<std::size_t>(std::floor(t_win / dt)) + 1);

    const auto tau_hat = detail::sinusoid_phasor(seg_tau, dt, omega, n_win);
    const auto theta_hat = detail::sinusoid_phasor(seg_theta, dt, omega, n_win);

    double sumsq = 0.0;
    for (std::size_t i = 0; i < n_win; ++i) sumsq += seg_theta[i] * seg_theta[i];
    const double rms = std::sqrt(sumsq / static_cast<double>(n_win));
    if (!(std::abs(theta_hat) > floor_rel * rms))
        throw NumericalError("estimate_frf_point: insufficient excitation at the requested frequency");

    return tau_hat / theta_hat;
}

/// Segment a record and estimate one FRF sample per segment frequency.
inline FrequencyResponse estimate_frf(const TimeSeries& record, const SegmentationSpec& seg,
                                      const std::vector<double>& omegas,
                                      double floor_rel = 1e-12) {
    const auto segments = segment_record(record, seg);
    if (omegas.size() != segments.size())
        throw ValidationError("estimate_frf: one frequency per segment required");
    FrequencyResponse frf;
    frf.samples.reserve(segments.size());
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const auto& s = segments[k];
        frf.samples.push_back(
            {omegas[k], estimate_frf_point(s.tau_c, s.theta_e, s.dt, omegas[k], floor_rel)});
    }
    validate(frf);
    return frf;
}

}  // namespace dynstiff::signal
