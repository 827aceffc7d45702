#pragma once

// Deterministic synthetic-data generators: four-line fine-structure
// spectra over temperature, power-law thermal series, correlation
// curves with shot noise, and power-dependent correlation parameters.
// These back the toolkit's test suites and are exposed through the CLI
// `synth` subcommands so every derived dataset can be regenerated.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sivspec/dynamics.hpp"
#include "sivspec/errors.hpp"
#include "sivspec/lineshape.hpp"
#include "sivspec/rng.hpp"
#include "sivspec/specfit.hpp"
#include "sivspec/thermal.hpp"
#include "sivspec/units.hpp"

namespace sivspec::synth {

/// Benchmark three-level rate sets (single SiV emitters, room and
/// cryogenic temperature) used as fixtures across the tool.
struct EmitterPreset {
    std::string name;
    dynamics::RateCoefficients rates;
};

inline std::vector<EmitterPreset> emitter_presets() {
    return {
        {"e1-rt", {1545.1, 17.4, 1.0, 11.9, 5.21, 80.4}},
        {"e1-cryo", {1363.9, 25.0, 10.0, 2.79, 6.3, 60.0}},
        {"e2-rt", {770.1, 11.1, 0.749, 5.65, 3.79, 217.0}},
        {"e2-cryo", {889.5, 5.73, 0.513, 3.3, 3.1, 558.0}},
        {"e3-rt", {1053.6, 21.7, 0.11, 3.44, 1.83, 201.0}},
        {"e3-cryo", {874.8, 18.8, 0.24, 3.4, 11.0, 8.1}},
    };
}

inline dynamics::RateCoefficients preset_rates(const std::string& name) {
    for (const auto& p : emitter_presets())
        if (p.name == name) return p.rates;
    throw InvalidInput("unknown emitter preset: " + name);
}

/// Sampled spectrum of Voigt peaks on a uniform grid, optionally with
/// Poisson counting noise.
struct SpectrumSpec {
    std::vector<lineshape::VoigtPeak> peaks;
    double lambda_min_nm = 736.0;
    double lambda_max_nm = 740.0;
    std::size_t samples = 400;
    double baseline_counts = 0.0;
    bool poisson_noise = false;
};

inline specfit::Spectrum make_spectrum(const SpectrumSpec& spec, rng::SplitMix64& gen) {
    if (spec.samples < 8) throw InvalidInput("make_spectrum: need at least 8 samples");
    if (!(spec.lambda_max_nm > spec.lambda_min_nm))
        throw InvalidInput("make_spectrum: empty wavelength range");
    specfit::Spectrum s;
    s.wavelengths_nm.reserve(spec.samples);
    s.counts.reserve(spec.samples);
    const double step = (spec.lambda_max_nm - spec.lambda_min_nm) /
                        static_cast<double>(spec.samples - 1);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        const double lam = spec.lambda_min_nm + step * static_cast<double>(i);
        double model = spec.baseline_counts;
        for (const auto& p : spec.peaks) model += lineshape::voigt_eval(p, lam);
        s.wavelengths_nm.push_back(lam);
        s.counts.push_back(spec.poisson_noise ? static_cast<double>(gen.poisson(model))
                                              : std::max(model, 0.0));
    }
    return s;
}

/// Four fine-structure line positions (nm) for doublet splittings
/// de and dg about a center wavelength, via exact frequency placement.
inline std::array<double, 4> four_line_positions_nm(double center_nm, double de_GHz,
                                                    double dg_GHz) {
    const double nu0 = units::convert_absolute(center_nm, units::Unit::nm, units::Unit::GHz);
    std::array<double, 4> out{};
    const double offs[4] = {-de_GHz / 2 - dg_GHz / 2, -de_GHz / 2 + dg_GHz / 2,
                            de_GHz / 2 - dg_GHz / 2, de_GHz / 2 + dg_GHz / 2};
    for (int i = 0; i < 4; ++i)
        out[i] = units::convert_absolute(nu0 + offs[i], units::Unit::GHz, units::Unit::nm);
    std::sort(out.begin(), out.end());
    return out;
}

/// Temperature series of four-line spectra: constant per-line Gaussian
/// (spectral diffusion) widths, Lorentzian widths growing as k T^3, an
/// optional linear red shift across the series, instrument response
/// applied in measured space.
struct FourLineSeriesSpec {
    double center_nm = 738.0;
    double excited_splitting_GHz = 260.0;
    double ground_splitting_GHz = 50.0;
    std::array<double, 4> wg_GHz{50.0, 50.0, 50.0, 50.0};  // intrinsic, per line
    double wl_coeff_GHz_per_K3 = 1.2e-5;                   // intrinsic w_L = k T^3
    std::vector<double> temperatures_K{5, 10, 20, 30, 40, 60, 90, 130, 180, 240, 295};
    lineshape::InstrumentProfile irf{};                    // in nm
    double peak_area_counts = 20000.0;                     // per line, counts * nm
    double baseline_counts = 20.0;
    double total_red_shift_nm = 0.0;                       // position drift, low T -> high T
    double span_factor = 6.0;                              // grid half-span in pattern widths
    std::size_t samples = 600;
    bool poisson_noise = true;
};

inline std::vector<specfit::Spectrum> make_four_line_series(const FourLineSeriesSpec& spec,
                                                            std::uint64_t seed) {
    if (spec.temperatures_K.empty()) throw InvalidInput("make_four_line_series: no temperatures");
    rng::SplitMix64 gen(rng::resolve_seed(seed));

    const double t_min = spec.temperatures_K.front();
    const double t_max = spec.temperatures_K.back();

    std::vector<specfit::Spectrum> out;
    for (double temperature : spec.temperatures_K) {
        const double drift =
            t_max > t_min
                ? spec.total_red_shift_nm * (temperature - t_min) / (t_max - t_min)
                : 0.0;
        const auto centers = four_line_positions_nm(spec.center_nm + drift,
                                                    spec.excited_splitting_GHz,
                                                    spec.ground_splitting_GHz);
        SpectrumSpec ss;
        ss.baseline_counts = spec.baseline_counts;
        ss.poisson_noise = spec.poisson_noise;
        ss.samples = spec.samples;

        const double wl_GHz = spec.wl_coeff_GHz_per_K3 * std::pow(temperature, 3);
        double widest = 0.0;
        for (int li = 0; li < 4; ++li) {
            lineshape::VoigtPeak intrinsic;
            intrinsic.center_nm = centers[li];
            intrinsic.area = spec.peak_area_counts;
            intrinsic.gaussian_fwhm_nm = units::convert_delta(
                spec.wg_GHz[li], units::Unit::GHz, units::Unit::nm, centers[li]);
            intrinsic.lorentzian_fwhm_nm = units::convert_delta(
                wl_GHz, units::Unit::GHz, units::Unit::nm, centers[li]);
            const auto measured = lineshape::convolve_instrument(intrinsic, spec.irf);
            ss.peaks.push_back(measured);
            widest = std::max(widest, lineshape::voigt_fwhm(measured.gaussian_fwhm_nm,
                                                            measured.lorentzian_fwhm_nm));
        }
        const double lo = ss.peaks.front().center_nm - spec.span_factor * widest;
        const double hi = ss.peaks.back().center_nm + spec.span_factor * widest;
        ss.lambda_min_nm = lo;
        ss.lambda_max_nm = hi;

        auto s = make_spectrum(ss, gen);
        s.temperature_K = temperature;
        s.label = "synthetic @" + std::to_string(temperature) + " K";
        out.push_back(std::move(s));
    }
    return out;
}

/// Thermal series values from a power-law model with multiplicative
/// Gaussian noise.
inline thermal::ThermalSeries make_thermal_series(const thermal::PowerLawModel& model,
                                                  const std::vector<double>& temperatures_K,
                                                  double relative_noise, std::uint64_t seed,
                                                  thermal::SeriesKind kind,
                                                  units::Unit unit = units::Unit::GHz) {
    rng::SplitMix64 gen(rng::resolve_seed(seed));
    thermal::ThermalSeries s;
    s.kind = kind;
    s.unit = unit;
    s.temperatures_K = temperatures_K;
    for (double t : temperatures_K) {
        const double clean = model.eval(t);
        const double noisy = relative_noise > 0.0
                                 ? clean * (1.0 + relative_noise * gen.normal())
                                 : clean;
        s.values.push_back(noisy);
        if (relative_noise > 0.0) s.sigmas.push_back(std::abs(clean) * relative_noise + 1e-12);
    }
    return s;
}

/// Power-dependent correlation parameters from a rate set, optionally
/// with multiplicative Gaussian noise per observable.
inline std::vector<dynamics::PowerPoint> make_power_series(
    const dynamics::RateCoefficients& rates, const std::vector<double>& powers_uW,
    double relative_noise = 0.0, std::uint64_t seed = 1) {
    rng::SplitMix64 gen(rng::resolve_seed(seed));
    std::vector<dynamics::PowerPoint> out;
    for (double p : powers_uW) {
        auto params = dynamics::g2_from_rates(rates, p);
        dynamics::PowerPoint pt;
        pt.power_uW = p;
        if (relative_noise > 0.0) {
            params.a = std::max(0.0, params.a * (1.0 + relative_noise * gen.normal()));
            params.tau1_ns *= 1.0 + relative_noise * gen.normal();
            params.tau2_ns *= 1.0 + relative_noise * gen.normal();
            params.tau2_ns = std::max(params.tau2_ns, params.tau1_ns);
            pt.sigmas = dynamics::G2Params{std::max(params.a * relative_noise, 1e-3),
                                           params.tau1_ns * relative_noise,
                                           params.tau2_ns * relative_noise};
        }
        pt.params = params;
        out.push_back(pt);
    }
    return out;
}

/// Measured correlation curve with shot noise: bin contents are Poisson
/// with mean counts_per_bin * g_meas, normalized back to a g2 estimate.
inline dynamics::G2Curve make_g2_curve(const dynamics::G2Params& params,
                                       const dynamics::MeasurementModel& m,
                                       const std::vector<double>& delays_ns,
                                       double counts_per_bin, std::uint64_t seed) {
    rng::SplitMix64 gen(rng::resolve_seed(seed));
    auto curve = dynamics::apply_measurement(params, m, delays_ns);
    if (counts_per_bin > 0.0)
        for (auto& v : curve.values)
            v = static_cast<double>(gen.poisson(counts_per_bin * v)) / counts_per_bin;
    return curve;
}

/// Saturation data I(P) from the steady-state emission rate of a rate
/// set, scaled by a detection efficiency (counts in Mcps).
inline std::vector<std::pair<double, double>> make_saturation_points(
    const dynamics::RateCoefficients& rates, const std::vector<double>& powers_uW,
    double efficiency) {
    std::vector<std::pair<double, double>> out;
    for (double p : powers_uW)
        out.emplace_back(p, efficiency * dynamics::emission_rate_MHz(rates, p));
    return out;
}

}  // namespace sivspec::synth
