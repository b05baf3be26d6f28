#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "dynstiff/identify.hpp"
#include "dynstiff/signal.hpp"
#include "dynstiff/types.hpp"

namespace dynstiff::sim {

/// Ground-truth synthetic subject: a stiffness model plus measurement
/// noise levels. Records generated from the same truth are bit-identical.
struct SubjectTruth {
    identify::ModelParams params;
    double sigma_tau = 0.0;    // torque noise, N*m
    double sigma_theta = 0.0;  // angle noise, rad
    std::uint64_t seed = 0;
};

inline void validate(const SubjectTruth& truth) {
    std::visit(
        [](const auto& p) {
            if (!(p.K_h > 0.0)) throw ValidationError("SubjectTruth: K_h must be positive");
            if (!(p.M > 0.0)) throw ValidationError("SubjectTruth: M must be positive");
        },
        truth.params);
    if (truth.sigma_tau < 0.0 || truth.sigma_theta < 0.0)
        throw ValidationError("SubjectTruth: noise sigmas must be non-negative");
}

/// Everything needed to realize one perturbation experiment.
struct ProtocolSpec {
    ChirpSpec chirp;
    SegmentationSpec segmentation;
    ExperimentConfig experiment;
};

inline void validate(const ProtocolSpec& protocol) {
    validate(protocol.chirp);
    validate(protocol.segmentation);
    validate(protocol.experiment);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent noise stream per (seed, stream) pair.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

/// Box-Muller normal sampler over mt19937_64. Self-contained so records
/// are reproducible across standard libraries (std::normal_distribution
/// is not pinned by the standard).
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detail

/// One steady-state perturbation slot at a single frequency:
/// theta_e(t) = A sin(w t), tau_c(t) = |S(jw)| A sin(w t + arg S(jw)),
/// plus white Gaussian measurement noise. Time is local to the segment.
/// segment_index selects the noise streams, so slots are independent and
/// may be generated in any order.
inline signal::Segment steady_state_segment(const SubjectTruth& truth, double omega,
                                            double amplitude, double duration, double dt,
                                            std::uint64_t segment_index = 0) {
    validate(truth);
    if (!(omega > 0.0)) throw ValidationError("steady_state_segment: omega must be positive");
    if (!(amplitude > 0.0)) throw ValidationError("steady_state_segment: amplitude must be positive");
    if (!(duration > 0.0) || !(dt > 0.0))
        throw ValidationError("steady_state_segment: duration and dt must be positive");

    const std::complex<double> S = identify::eval_stiffness(truth.params, omega);
    const double mag = std::abs(S) * amplitude;
    const double phase = std::arg(S);

    detail::GaussianSampler noise_tau(detail::mix_seed(truth.seed, 2 * segment_index));
    detail::GaussianSampler noise_theta(detail::mix_seed(truth.seed, 2 * segment_index + 1));

    const auto n = static_cast<std::size_t>(std::llround(duration / dt));
    signal::Segment seg;
    seg.dt = dt;
    seg.tau_c.resize(n);
    seg.theta_e.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        double tau = mag * std::sin(omega * t + phase);
        double theta = amplitude * std::sin(omega * t);
        if (truth.sigma_tau > 0.0) tau += truth.sigma_tau * noise_tau();
        if (truth.sigma_theta > 0.0) theta += truth.sigma_theta * noise_theta();
        seg.tau_c[i] = tau;
        seg.theta_e[i] = theta;
    }
    return seg;
}

/// Full perturbation record: n_segments slots back to back, each slot
/// steady state throughout at its own segment frequency (hysteretic
/// damping has no causal time realization, so there is no single ODE to
/// integrate; the identification pipeline only reads steady-state
/// windows). Records are zero mean: bias torque is metadata, modeled as
/// already cancelled by the exoskeleton.
inline TimeSeries simulate_protocol(const SubjectTruth& truth, const ProtocolSpec& protocol) {
    validate(truth);
    validate(protocol);
    const auto omegas = signal::segment_frequencies(protocol.chirp, protocol.segmentation);
    const double dt = 1.0 / protocol.chirp.sample_rate;

    TimeSeries record;
    record.dt = dt;
    record.t0 = 0.0;
    const auto per_slot = static_cast<std::size_t>(
        std::llround(protocol.segmentation.segment_period / dt));
    record.tau_c.reserve(per_slot * omegas.size());
    record.theta_e.reserve(per_slot * omegas.size());
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        const auto seg = steady_state_segment(truth, omegas[k], protocol.chirp.amplitude,
                                              protocol.segmentation.segment_period, dt, k);
        record.tau_c.insert(record.tau_c.end(), seg.tau_c.begin(), seg.tau_c.end());
        record.theta_e.insert(record.theta_e.end(), seg.theta_e.begin(), seg.theta_e.end());
    }
    return record;
}

/// Work done against the joint over one steady-state cycle,
/// W = closed-path integral of tau d(theta). For a hysteretic model this
/// equals pi*C_h*A^2 independent of frequency.
inline double cycle_work(const identify::ModelParams& params, double omega, double amplitude) {
    const std::complex<double> S = identify::eval_stiffness(params, omega);
    // theta = A sin(wt), tau = |S| A sin(wt + phi): only the quadrature
    // component does net work, W = pi A^2 |S| sin(phi).
    return M_PI * amplitude * amplitude * std::abs(S) * std::sin(std::arg(S));
}

}  // namespace dynstiff::sim
