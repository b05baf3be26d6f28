#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynstiff {

/// Bad input data or parameters (CLI maps this to exit code 2).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A computation that cannot proceed numerically (CLI exit code 3).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Uniformly sampled torque/angle record.
/// Invariants: dt > 0, columns have equal length >= 2, all samples finite.
struct TimeSeries {
    double dt = 0.0;              // seconds per sample
    double t0 = 0.0;              // start time, seconds
    std::vector<double> tau_c;    // interaction torque, N*m
    std::vector<double> theta_e;  // joint angle, rad
};

inline void validate(const TimeSeries& ts) {
    if (!(ts.dt > 0.0)) throw ValidationError("TimeSeries: dt must be positive");
    if (ts.tau_c.size() != ts.theta_e.size())
        throw ValidationError("TimeSeries: torque and angle columns differ in length");
    if (ts.tau_c.size() < 2) throw ValidationError("TimeSeries: need at least 2 samples");
    for (double v : ts.tau_c)
        if (!std::isfinite(v)) throw ValidationError("TimeSeries: non-finite torque sample");
    for (double v : ts.theta_e)
        if (!std::isfinite(v)) throw ValidationError("TimeSeries: non-finite angle sample");
}

/// Single column of uniformly sampled values (e.g. an excitation waveform).
struct SampledSignal {
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<double> values;
};

/// Exponential chirp excitation description.
struct ChirpSpec {
    double omega_min = 0.0;   // rad/s
    double omega_max = 0.0;   // rad/s
    double duration = 0.0;    // s
    double amplitude = 0.0;   // N*m
    double sample_rate = 1000.0;  // Hz; default comfortably above the dynamics of interest
};

inline void validate(const ChirpSpec& c) {
    if (!(c.omega_min > 0.0)) throw ValidationError("ChirpSpec: omega_min must be positive (log sweep undefined at 0)");
    if (!(c.omega_min <= c.omega_max)) throw ValidationError("ChirpSpec: omega_min must not exceed omega_max");
    if (!(c.duration > 0.0)) throw ValidationError("ChirpSpec: duration must be positive");
    if (c.amplitude < 0.0) throw ValidationError("ChirpSpec: amplitude must be non-negative");
    if (!(c.sample_rate > 2.0 * c.omega_max / (2.0 * M_PI)))
        throw ValidationError("ChirpSpec: sample_rate violates the Nyquist bound for omega_max");
}

/// How a long record is split into per-frequency windows.
/// Each segment occupies segment_period seconds; only the first
/// used_duration seconds of each slot enter the estimate.
struct SegmentationSpec {
    int n_segments = 10;
    double segment_period = 10.0;   // s
    double used_duration = 5.78;    // s
};

inline void validate(const SegmentationSpec& s) {
    if (s.n_segments < 1) throw ValidationError("SegmentationSpec: n_segments must be >= 1");
    if (!(s.used_duration > 0.0)) throw ValidationError("SegmentationSpec: used_duration must be positive");
    if (!(s.used_duration <= s.segment_period))
        throw ValidationError("SegmentationSpec: used_duration exceeds segment_period");
}

/// One complex dynamic-stiffness sample S(j*omega), N*m/rad.
struct FrequencySample {
    double omega = 0.0;
    std::complex<double> value;
};

/// Ordered single-frequency samples with experiment metadata.
/// Invariant: omegas strictly increasing.
struct FrequencyResponse {
    std::vector<FrequencySample> samples;
    std::string exp_label;
    double alpha = 1.0;
    double M_e = 0.0;
};

inline void validate(const FrequencyResponse& frf) {
    for (std::size_t i = 0; i < frf.samples.size(); ++i) {
        const auto& s = frf.samples[i];
        if (!(s.omega > 0.0)) throw ValidationError("FrequencyResponse: omega must be positive");
        if (!std::isfinite(s.value.real()) || !std::isfinite(s.value.imag()))
            throw ValidationError("FrequencyResponse: non-finite sample");
        if (i > 0 && !(s.omega > frf.samples[i - 1].omega))
            throw ValidationError("FrequencyResponse: omegas must be strictly increasing");
    }
}

/// Per-experiment protocol constants. alpha is the amplification factor,
/// M_e the exoskeleton moment of inertia about the joint. The remaining
/// fields are provenance metadata and do not enter any computation.
struct ExperimentConfig {
    std::string label;
    double alpha = 1.0;
    double M_e = 0.0;         // kg*m^2
    double bias_torque = 0.0; // N*m, metadata only
    std::string load_label;
    std::string grip_label;
};

inline void validate(const ExperimentConfig& e) {
    if (!(e.alpha >= 1.0)) throw ValidationError("ExperimentConfig: alpha must be >= 1");
    if (e.M_e < 0.0) throw ValidationError("ExperimentConfig: M_e must be non-negative");
}

}  // namespace dynstiff
