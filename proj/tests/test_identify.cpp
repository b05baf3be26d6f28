#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "dynstiff/identify.hpp"
#include "dynstiff/sim.hpp"
#include "dynstiff/types.hpp"

using Catch::Approx;
using namespace dynstiff;

namespace {

std::vector<double> log_omegas(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return out;
}

}  // namespace

TEST_CASE("stiffness evaluation matches the model algebra") {
    identify::ModelParamsM1 m1{10.0, 2.0, 0.5};
    identify::ModelParamsM2 m2{10.0, 5.0, 0.5};
    identify::ModelParamsM3 m3{10.0, 5.0, 2.0, 0.5};
    const double w = 3.0;
    CHECK(identify::eval_stiffness(m1, w) == std::complex<double>(10.0 - 0.5 * 9.0, 6.0));
    CHECK(identify::eval_stiffness(m2, w) == std::complex<double>(5.5, 5.0));
    CHECK(identify::eval_stiffness(m3, w) == std::complex<double>(5.5, 11.0));
    CHECK(std::string(identify::model_code(identify::ModelParams{m2})) == "M2");
}

TEST_CASE("fits recover exact model data and share the real-part solution") {
    const auto omegas = log_omegas(2.0, 20.0, 10);
    identify::ModelParamsM3 truth{15.74, 10.44, -0.60, 1.18};
    auto frf = identify::eval_on_grid(identify::ModelParams{truth}, omegas);

    const auto m1 = identify::fit_m1(frf);
    const auto m2 = identify::fit_m2(frf);
    const auto m3 = identify::fit_m3(frf);

    CHECK(m3.K_h == Approx(truth.K_h).epsilon(1e-12));
    CHECK(m3.M == Approx(truth.M).epsilon(1e-12));
    CHECK(m3.C_h == Approx(truth.C_h).epsilon(1e-10));
    CHECK(m3.B_h == Approx(truth.B_h).margin(1e-10));

    // the shared regression makes K and M bit-identical across models
    CHECK(m1.K_h == m3.K_h);
    CHECK(m2.K_h == m3.K_h);
    CHECK(m1.M == m3.M);
    CHECK(m2.M == m3.M);
}

TEST_CASE("each reduced fit is exact on data from its own model") {
    const auto omegas = log_omegas(3.0, 30.0, 10);
    identify::ModelParamsM1 t1{12.73, 1.41, 0.20};
    identify::ModelParamsM2 t2{25.95, 16.75, 1.03};
    const auto f1 = identify::fit_m1(identify::eval_on_grid(identify::ModelParams{t1}, omegas));
    CHECK(f1.B_h == Approx(t1.B_h).epsilon(1e-12));
    const auto f2 = identify::fit_m2(identify::eval_on_grid(identify::ModelParams{t2}, omegas));
    CHECK(f2.C_h == Approx(t2.C_h).epsilon(1e-12));
}

TEST_CASE("inertia compensation removes the attenuated exoskeleton term") {
    const auto omegas = log_omegas(3.0, 30.0, 10);
    identify::ModelParamsM2 truth{25.95, 16.75, 1.03};
    auto frf = identify::eval_on_grid(identify::ModelParams{truth}, omegas);

    ExperimentConfig cfg;
    cfg.label = "II.3";
    cfg.alpha = 4.0;
    cfg.M_e = 1.0;
    const auto comp = identify::compensate_inertia(frf, cfg);

    for (std::size_t i = 0; i < omegas.size(); ++i) {
        const double w = omegas[i];
        CHECK(comp.samples[i].value.real() ==
              Approx(frf.samples[i].value.real() - 0.25 * w * w).epsilon(1e-14));
        CHECK(comp.samples[i].value.imag() == frf.samples[i].value.imag());
    }
    CHECK(comp.alpha == 4.0);
    CHECK(comp.M_e == 1.0);
    CHECK(comp.exp_label == "II.3");

    // fitting after compensation lumps M_e/alpha into the inertia estimate
    const auto fit = identify::fit_m2(comp);
    CHECK(fit.M == Approx(truth.M + cfg.M_e / cfg.alpha).epsilon(1e-12));
    CHECK(fit.K_h == Approx(truth.K_h).epsilon(1e-12));
    CHECK(fit.C_h == Approx(truth.C_h).epsilon(1e-12));
}

TEST_CASE("summary statistics match their closed forms") {
    CHECK(identify::natural_frequency(10.05, 0.28) == Approx(5.9914).margin(5e-4));
    CHECK(identify::damping_ratio(identify::ModelParamsM1{10.05, 1.03, 0.28}) ==
          Approx(0.31).margin(0.005));
    CHECK(identify::damping_ratio(identify::ModelParamsM2{10.05, 5.89, 0.28}) ==
          Approx(0.29).margin(0.005));
    CHECK(identify::damping_ratio(identify::ModelParamsM3{10.05, 4.97, 0.18, 0.28}) ==
          Approx(0.30).margin(0.005));
    CHECK_THROWS_AS(identify::natural_frequency(-1.0, 0.2), ValidationError);
}

TEST_CASE("degenerate grids are rejected") {
    // single repeated frequency: rank-deficient real-part regression
    FrequencyResponse frf;
    frf.samples = {{4.0, {1.0, 0.5}}};
    CHECK_THROWS_AS(identify::fit_real_part(frf), ValidationError);  // too few samples

    FrequencyResponse two;
    two.samples = {{4.0, {1.0, 0.5}}, {4.0 + 1e-16, {1.0, 0.5}}};
    CHECK_THROWS_AS(identify::fit_real_part(two), NumericalError);
}

TEST_CASE("non-physical real-part fits are flagged") {
    // rising real part implies negative inertia
    FrequencyResponse frf;
    for (double w : log_omegas(2.0, 20.0, 6)) frf.samples.push_back({w, {1.0 + w * w, 0.0}});
    CHECK_THROWS_AS(identify::fit_real_part(frf), NumericalError);
}

TEST_CASE("parameter recovery stays accurate under measurement noise") {
    const auto omegas = log_omegas(2.0, 20.0, 10);
    identify::ModelParamsM2 truth{10.05, 5.89, 0.28};
    sim::detail::GaussianSampler noise(20250815);

    std::vector<double> k_err, m_err, c_err;
    for (int trial = 0; trial < 100; ++trial) {
        FrequencyResponse frf;
        for (double w : omegas) {
            auto v = identify::eval_stiffness(truth, w);
            frf.samples.push_back({w, v + std::complex<double>{0.1 * noise(), 0.1 * noise()}});
        }
        const auto fit = identify::fit_m2(frf);
        k_err.push_back(std::fabs(fit.K_h - truth.K_h) / truth.K_h);
        m_err.push_back(std::fabs(fit.M - truth.M) / truth.M);
        c_err.push_back(std::fabs(fit.C_h - truth.C_h) / truth.C_h);
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(k_err) < 0.05);
    CHECK(median(m_err) < 0.05);
    CHECK(median(c_err) < 0.05);
}
