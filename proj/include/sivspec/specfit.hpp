#pragma once

// Multi-peak Voigt fits to measured spectra, the two-stage temperature
// series strategy (fix w_L at low temperature to pin down spectral
// diffusion, then fix w_G to its low-temperature mean and track the
// homogeneous width), fine-structure splittings from four-line
// patterns, and spectral-diffusion statistics.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sivspec/errors.hpp"
#include "sivspec/levmar.hpp"
#include "sivspec/lineshape.hpp"
#include "sivspec/units.hpp"

namespace sivspec::specfit {

struct Spectrum {
    std::vector<double> wavelengths_nm;  // strictly increasing
    std::vector<double> counts;          // >= 0
    std::optional<double> temperature_K;
    std::optional<double> excitation_power_uW;
    std::string label;

    void validate() const {
        if (wavelengths_nm.size() != counts.size()) throw InvalidInput("Spectrum: length mismatch");
        if (wavelengths_nm.size() < 8) throw InvalidInput("Spectrum: need at least 8 samples");
        for (std::size_t i = 0; i < wavelengths_nm.size(); ++i) {
            if (!std::isfinite(wavelengths_nm[i]) || !std::isfinite(counts[i]))
                throw InvalidInput("Spectrum: non-finite sample");
            if (counts[i] < 0.0) throw InvalidInput("Spectrum: negative counts");
            if (i > 0 && !(wavelengths_nm[i] > wavelengths_nm[i - 1]))
                throw InvalidInput("Spectrum: wavelengths must be strictly increasing");
        }
    }
};

enum class BaselineModel { constant, linear };
enum class Weighting { none, poisson };

struct ParamSetting {
    bool fixed = false;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

struct PeakConfig {
    lineshape::VoigtPeak init;
    ParamSetting area{false, 0.0};
    ParamSetting center;
    ParamSetting gaussian_fwhm{false, 0.0};
    ParamSetting lorentzian_fwhm{false, 0.0};
};

struct PeakFitConfig {
    std::vector<PeakConfig> peaks;
    BaselineModel baseline = BaselineModel::constant;
    bool fit_baseline = true;
    double baseline_offset_init = 0.0;
    double baseline_slope_init = 0.0;
    Weighting weighting = Weighting::none;
    int max_iterations = 300;

    std::size_t free_parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : peaks)
            for (const auto* s : {&p.area, &p.center, &p.gaussian_fwhm, &p.lorentzian_fwhm})
                if (!s->fixed) ++n;
        if (fit_baseline) n += baseline == BaselineModel::linear ? 2 : 1;
        return n;
    }

    void validate() const {
        if (peaks.empty()) throw InvalidInput("PeakFitConfig: no peaks");
        if (free_parameter_count() == 0) throw InvalidInput("PeakFitConfig: no free parameters");
        for (const auto& p : peaks) {
            const double values[] = {p.init.area, p.init.center_nm, p.init.gaussian_fwhm_nm,
                                     p.init.lorentzian_fwhm_nm};
            const ParamSetting* settings[] = {&p.area, &p.center, &p.gaussian_fwhm,
                                              &p.lorentzian_fwhm};
            for (int i = 0; i < 4; ++i)
                if (!(values[i] >= settings[i]->lower && values[i] <= settings[i]->upper))
                    throw InvalidInput("PeakFitConfig: initial value outside its bounds");
        }
    }
};

struct FitResult {
    std::vector<lineshape::VoigtPeak> peaks;
    double baseline_offset = 0.0;
    double baseline_slope = 0.0;  // per nm about the grid midpoint
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    Eigen::MatrixXd covariance;   // over free parameters in packing order
    std::vector<double> parameter_sigmas;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residuals;  // weighted
    std::vector<std::string> warnings;
};

namespace detail {

// Model evaluation tolerant of boundary width values inside the optimizer.
inline double peak_eval_raw(double area, double center, double wg, double wl, double lambda) {
    wg = std::max(wg, 0.0);
    wl = std::max(wl, 0.0);
    if (area == 0.0 || (wg == 0.0 && wl == 0.0)) return 0.0;
    const double d = lambda - center;
    if (wl <= lineshape::kPureLimitRatio * wg) return lineshape::gaussian_profile(area, wg, d);
    if (wg <= lineshape::kPureLimitRatio * wl) return lineshape::lorentzian_profile(area, wl, d);
    const double sigma = wg / std::sqrt(8.0 * math::kLn2);
    const double x = d / (sigma * math::kSqrt2);
    const double y = 0.5 * wl / (sigma * math::kSqrt2);
    return area * math::voigt_kernel(x, y) / (sigma * std::sqrt(2.0 * math::kPi));
}

// Analytic partials for the pure-Gaussian / pure-Lorentzian limits;
// the general Voigt columns use central differences on one peak.
inline std::array<double, 4> gaussian_partials(double area, double center, double w, double lambda) {
    const double d = lambda - center;
    const double v = lineshape::gaussian_profile(area, w, d);
    const double q = 8.0 * math::kLn2 * d / (w * w);
    return {v / area, v * q, v * (-1.0 / w + q * d / w), 0.0};
}

inline std::array<double, 4> lorentzian_partials(double area, double center, double w, double lambda) {
    const double d = lambda - center;
    const double u = 2.0 * d / w;
    const double denom = 1.0 + u * u;
    const double v = lineshape::lorentzian_profile(area, w, d);
    return {v / area, v * 4.0 * u / (w * denom), 0.0,
            -area * (2.0 / math::kPi) * (1.0 - u * u) / ((w * denom) * (w * denom))};
}

struct PackedParam {
    int peak = -1;   // -1: baseline
    int field = 0;   // peak: 0 area, 1 center, 2 wg, 3 wl; baseline: 0 offset, 1 slope
};

}  // namespace detail

/// Damped least squares fit of a multi-peak Voigt model plus baseline.
/// Deterministic; non-convergence is reported, never silently dropped.
inline FitResult fit_spectrum(const Spectrum& s, const PeakFitConfig& cfg) {
    s.validate();
    cfg.validate();

    const std::size_t npts = s.counts.size();
    const std::size_t nfree = cfg.free_parameter_count();
    if (npts <= nfree)
        throw InvalidInput("fit_spectrum: need more data points than free parameters");

    std::vector<double> weight(npts, 1.0);
    if (cfg.weighting == Weighting::poisson)
        for (std::size_t i = 0; i < npts; ++i)
            weight[i] = 1.0 / std::sqrt(std::max(s.counts[i], 1.0));

    const double lam_mid =
        0.5 * (s.wavelengths_nm.front() + s.wavelengths_nm.back());

    // Parameter packing.
    std::vector<detail::PackedParam> packing;
    Eigen::VectorXd x0(nfree), lower(nfree), upper(nfree);
    std::size_t k = 0;
    for (std::size_t p = 0; p < cfg.peaks.size(); ++p) {
        const auto& pc = cfg.peaks[p];
        const double init[] = {pc.init.area, pc.init.center_nm, pc.init.gaussian_fwhm_nm,
                               pc.init.lorentzian_fwhm_nm};
        const ParamSetting* st[] = {&pc.area, &pc.center, &pc.gaussian_fwhm, &pc.lorentzian_fwhm};
        for (int f = 0; f < 4; ++f) {
            if (st[f]->fixed) continue;
            packing.push_back({static_cast<int>(p), f});
            x0[k] = init[f];
            lower[k] = st[f]->lower;
            upper[k] = st[f]->upper;
            ++k;
        }
    }
    if (cfg.fit_baseline) {
        packing.push_back({-1, 0});
        x0[k] = cfg.baseline_offset_init;
        lower[k] = -std::numeric_limits<double>::infinity();
        upper[k] = std::numeric_limits<double>::infinity();
        ++k;
        if (cfg.baseline == BaselineModel::linear) {
            packing.push_back({-1, 1});
            x0[k] = cfg.baseline_slope_init;
            lower[k] = -std::numeric_limits<double>::infinity();
            upper[k] = std::numeric_limits<double>::infinity();
            ++k;
        }
    }

    struct State {
        std::vector<std::array<double, 4>> peaks;  // area, center, wg, wl
        double offset, slope;
    };
    auto unpack = [&](const Eigen::VectorXd& x) {
        State st;
        st.peaks.resize(cfg.peaks.size());
        for (std::size_t p = 0; p < cfg.peaks.size(); ++p)
            st.peaks[p] = {cfg.peaks[p].init.area, cfg.peaks[p].init.center_nm,
                           cfg.peaks[p].init.gaussian_fwhm_nm,
                           cfg.peaks[p].init.lorentzian_fwhm_nm};
        st.offset = cfg.baseline_offset_init;
        st.slope = cfg.baseline == BaselineModel::linear ? cfg.baseline_slope_init : 0.0;
        for (std::size_t j = 0; j < packing.size(); ++j) {
            const auto& pp = packing[j];
            if (pp.peak >= 0)
                st.peaks[pp.peak][pp.field] = x[j];
            else if (pp.field == 0)
                st.offset = x[j];
            else
                st.slope = x[j];
        }
        return st;
    };

    auto residuals = [&](const Eigen::VectorXd& x) {
        const State st = unpack(x);
        Eigen::VectorXd r(npts);
        for (std::size_t i = 0; i < npts; ++i) {
            const double lam = s.wavelengths_nm[i];
            double model = st.offset + st.slope * (lam - lam_mid);
            for (const auto& pk : st.peaks)
                model += detail::peak_eval_raw(pk[0], pk[1], pk[2], pk[3], lam);
            r[i] = (model - s.counts[i]) * weight[i];
        }
        return r;
    };

    auto jacobian = [&](const Eigen::VectorXd& x) {
        const State st = unpack(x);
        Eigen::MatrixXd jac(npts, nfree);
        for (std::size_t j = 0; j < packing.size(); ++j) {
            const auto& pp = packing[j];
            if (pp.peak < 0) {
                for (std::size_t i = 0; i < npts; ++i)
                    jac(i, j) = (pp.field == 0 ? 1.0 : s.wavelengths_nm[i] - lam_mid) * weight[i];
                continue;
            }
            const auto& pk = st.peaks[pp.peak];
            const bool pure_g = pk[3] <= lineshape::kPureLimitRatio * pk[2];
            const bool pure_l = pk[2] <= lineshape::kPureLimitRatio * pk[3];
            if ((pure_g || pure_l) && pk[0] != 0.0 && (pk[2] > 0.0 || pk[3] > 0.0)) {
                for (std::size_t i = 0; i < npts; ++i) {
                    const auto d =
                        pure_g ? detail::gaussian_partials(pk[0], pk[1], pk[2], s.wavelengths_nm[i])
                               : detail::lorentzian_partials(pk[0], pk[1], pk[3], s.wavelengths_nm[i]);
                    jac(i, j) = d[pp.field == 3 ? 3 : pp.field] * weight[i];
                }
            } else {
                // central difference on this peak's contribution only
                const double h = 1e-6 * std::max(std::abs(pk[pp.field]), 1e-7);
                auto mod = pk;
                for (std::size_t i = 0; i < npts; ++i) {
                    mod[pp.field] = pk[pp.field] + h;
                    const double fp =
                        detail::peak_eval_raw(mod[0], mod[1], mod[2], mod[3], s.wavelengths_nm[i]);
                    mod[pp.field] = pk[pp.field] - h;
                    const double fm =
                        detail::peak_eval_raw(mod[0], mod[1], mod[2], mod[3], s.wavelengths_nm[i]);
                    mod[pp.field] = pk[pp.field];
                    jac(i, j) = (fp - fm) / (2.0 * h) * weight[i];
                }
            }
        }
        return jac;
    };

    fit::LMOptions opt;
    opt.max_iterations = cfg.max_iterations;
    opt.lower = lower;
    opt.upper = upper;
    const auto lm = fit::levenberg_marquardt(residuals, x0, opt, jacobian);

    FitResult out;
    const State st = unpack(lm.params);
    for (const auto& pk : st.peaks)
        out.peaks.push_back({pk[0], pk[1], std::max(pk[2], 0.0), std::max(pk[3], 0.0)});
    out.baseline_offset = st.offset;
    out.baseline_slope = st.slope;
    out.chi2 = lm.chi2;
    const std::size_t dof = npts - nfree;
    out.reduced_chi2 = lm.chi2 / static_cast<double>(dof);
    out.converged = lm.converged;
    out.iterations = lm.iterations;
    const Eigen::VectorXd r = residuals(lm.params);
    out.residuals.assign(r.data(), r.data() + r.size());

    // Covariance: weighted residuals carry their own scale under Poisson
    // weighting; unit weights get the usual chi2/dof estimate.
    const double scale = cfg.weighting == Weighting::poisson ? 1.0 : out.reduced_chi2;
    Eigen::MatrixXd cov = 0.5 * (lm.covariance + lm.covariance.transpose()) * scale;
    out.covariance = cov;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        out.parameter_sigmas.push_back(std::sqrt(std::max(0.0, cov(i, i))));

    if (!lm.converged) out.warnings.push_back("fit did not converge: " + lm.message);
    if (out.reduced_chi2 > 10.0)
        out.warnings.push_back("reduced chi2 > 10: model does not describe the data");
    static const char* kFieldNames[] = {"area", "center", "w_G", "w_L"};
    for (std::size_t j = 0; j < packing.size(); ++j) {
        const auto& pp = packing[j];
        if (pp.peak < 0) continue;
        const double value = std::abs(lm.params[j]);
        if (pp.field == 0 && value < 3.0 * out.parameter_sigmas[j])
            out.warnings.push_back("peak " + std::to_string(pp.peak) +
                                   " amplitude not significant (below 3 sigma)");
        if (out.parameter_sigmas[j] > 10.0 * std::max(value, 1e-300))
            out.warnings.push_back("peak " + std::to_string(pp.peak) + " " +
                                   kFieldNames[pp.field] + " unconstrained by the data");
    }
    return out;
}

/// Local maxima above a prominence threshold (fraction of the data
/// range), widths seeded from half-prominence crossings. Returns initial
/// guesses ordered by wavelength; an empty list when nothing qualifies.
inline std::vector<lineshape::VoigtPeak> detect_peaks(const Spectrum& s, double min_prominence) {
    s.validate();
    if (!(min_prominence >= 0.0 && min_prominence <= 1.0))
        throw InvalidInput("detect_peaks: prominence fraction must be in [0,1]");

    const auto& c = s.counts;
    const auto& lam = s.wavelengths_nm;
    const std::size_t n = c.size();
    const double cmin = *std::min_element(c.begin(), c.end());
    const double cmax = *std::max_element(c.begin(), c.end());
    if (cmax == cmin) return {};
    const double threshold = min_prominence * (cmax - cmin);

    std::vector<lineshape::VoigtPeak> out;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(c[i] >= c[i - 1] && c[i] >= c[i + 1] && (c[i] > c[i - 1] || c[i] > c[i + 1])))
            continue;
        if (c[i] == c[i - 1]) continue;  // plateau: keep leftmost sample only

        // Topographic prominence: lowest dip separating this maximum from
        // higher ground on each side.
        double left_min = c[i], right_min = c[i];
        for (std::size_t j = i; j-- > 0;) {
            if (c[j] > c[i]) break;
            left_min = std::min(left_min, c[j]);
            if (j == 0) break;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (c[j] > c[i]) break;
            right_min = std::min(right_min, c[j]);
        }
        const double prominence = c[i] - std::max(left_min, right_min);
        if (prominence < threshold || prominence <= 0.0) continue;

        const double level = c[i] - 0.5 * prominence;
        double left_x = lam.front(), right_x = lam.back();
        for (std::size_t j = i; j-- > 0;) {
            if (c[j] <= level) {
                const double f = (level - c[j]) / (c[j + 1] - c[j]);
                left_x = lam[j] + f * (lam[j + 1] - lam[j]);
                break;
            }
            if (j == 0) break;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (c[j] <= level) {
                const double f = (c[j - 1] - level) / (c[j - 1] - c[j]);
                right_x = lam[j - 1] + f * (lam[j] - lam[j - 1]);
                break;
            }
        }
        const double fwhm = std::max(right_x - left_x, lam[i] - lam[i - 1]);
        lineshape::VoigtPeak seed;
        seed.center_nm = lam[i];
        seed.gaussian_fwhm_nm = 0.8 * fwhm;
        seed.lorentzian_fwhm_nm = 0.2 * fwhm;
        seed.area = 1.0645 * prominence * fwhm;  // Gaussian height-area relation
        out.push_back(seed);
    }
    return out;
}

struct FineStructure {
    double excited_splitting_GHz = 0.0;
    double ground_splitting_GHz = 0.0;
    double center_nm = 0.0;
};

namespace detail {

struct DoubletSplittings {
    double outer;  // separation of doublet centers
    double inner;  // mean intra-doublet separation
    double mean;
};

inline DoubletSplittings doublet_pattern(std::array<double, 4> pos) {
    std::sort(pos.begin(), pos.end());
    const double g12 = pos[1] - pos[0];
    const double g23 = pos[2] - pos[1];
    const double g34 = pos[3] - pos[2];
    if (!(g23 > g12 && g23 > g34))
        throw AmbiguousPattern("fine_structure: positions do not form two doublets");
    return {0.5 * ((pos[2] + pos[3]) - (pos[0] + pos[1])), 0.5 * (g12 + g34),
            0.25 * (pos[0] + pos[1] + pos[2] + pos[3])};
}

}  // namespace detail

/// Splittings from four line positions given directly in GHz.
inline FineStructure fine_structure_from_ghz(const std::array<double, 4>& pos_ghz) {
    const auto d = detail::doublet_pattern(pos_ghz);
    FineStructure fs;
    fs.excited_splitting_GHz = d.outer;
    fs.ground_splitting_GHz = d.inner;
    fs.center_nm = d.mean > 0.0 ? units::convert_absolute(d.mean, units::Unit::GHz, units::Unit::nm)
                                : 0.0;
    return fs;
}

/// Splittings from four line positions in nm: the larger splitting
/// separates the doublet centers, the smaller is the mean intra-doublet
/// separation, both via exact absolute frequency conversion.
inline FineStructure fine_structure(const std::array<double, 4>& centers_nm) {
    std::array<double, 4> ghz{};
    for (int i = 0; i < 4; ++i) {
        if (!(centers_nm[i] > 0.0)) throw InvalidInput("fine_structure: positions must be > 0 nm");
        ghz[i] = units::convert_absolute(centers_nm[i], units::Unit::nm, units::Unit::GHz);
    }
    return fine_structure_from_ghz(ghz);
}

struct StagedLineRecord {
    std::size_t line_index = 0;
    double temperature_K = 0.0;
    int stage = 1;
    bool present = true;
    double center_nm = 0.0;
    double area = 0.0;
    double measured_wg_nm = 0.0;  // instrument-convolved, as fitted
    double measured_wl_nm = 0.0;
    double wg_nm = 0.0;           // instrument-deconvolved
    double wl_nm = 0.0;
    double wg_GHz = 0.0;
    double wl_GHz = 0.0;
    bool resolution_limited = false;
};

struct StagedSeriesOptions {
    double min_prominence = 0.05;
    Weighting weighting = Weighting::poisson;
    double lost_area_fraction = 0.005;  // line marked absent below this share of its initial area
    double chi2_flag_threshold = 3.0;
};

struct SpectrumFitSummary {
    double temperature_K = 0.0;
    std::string label;
    int stage = 1;
    std::vector<lineshape::VoigtPeak> peaks;  // measured-space model
    double baseline_offset = 0.0;
    double reduced_chi2 = 0.0;
    bool converged = false;
};

struct StagedSeriesResult {
    std::vector<StagedLineRecord> records;   // ordered by (temperature, line)
    std::size_t line_count = 0;
    std::vector<double> line_mean_measured_wg_nm;  // stage-1 means, used as stage-2 fixed values
    std::vector<double> per_spectrum_reduced_chi2;
    std::vector<SpectrumFitSummary> fits;    // one per fitted spectrum, for plot data
    std::vector<std::string> warnings;
    double t_low_max_K = 0.0;
};

namespace detail {

struct TrackedLine {
    double center;
    double step = 0.0;   // last observed center shift per spectrum
    double area;
    double wg;
    double wl;
    double area_ref;
    bool present = true;
};

}  // namespace detail

/// Two-stage series fit. Stage 1 (T <= t_low_max): w_L fixed to the
/// instrument Lorentzian width, w_G free per line. Stage 2 (T above):
/// each line's w_G fixed to its stage-1 mean, w_L free. All reported
/// widths are instrument-deconvolved; a clamped deconvolution flags the
/// record resolution-limited instead of failing the series.
inline StagedSeriesResult staged_series_fit(const std::vector<Spectrum>& series,
                                            const lineshape::InstrumentProfile& irf,
                                            double t_low_max_K,
                                            const StagedSeriesOptions& options = {}) {
    if (series.empty()) throw InvalidInput("staged_series_fit: empty series");
    irf.validate();
    for (std::size_t i = 0; i < series.size(); ++i) {
        series[i].validate();
        if (!series[i].temperature_K)
            throw InvalidInput("staged_series_fit: every spectrum needs a temperature");
        if (i > 0 && *series[i].temperature_K < *series[i - 1].temperature_K)
            throw InvalidInput("staged_series_fit: series must be ordered by temperature");
    }

    StagedSeriesResult out;
    out.t_low_max_K = t_low_max_K;

    const auto seeds = detect_peaks(series.front(), options.min_prominence);
    if (seeds.empty())
        throw InvalidInput("staged_series_fit: no peaks detected in the lowest-temperature spectrum");
    out.line_count = seeds.size();

    std::vector<detail::TrackedLine> lines;
    for (const auto& p : seeds)
        lines.push_back({p.center_nm, 0.0, p.area, p.gaussian_fwhm_nm,
                         std::max(irf.lorentzian_fwhm_nm, 1e-6), p.area});

    auto min_gap = [&]() {
        double g = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < lines.size(); ++i)
            g = std::min(g, lines[i].center - lines[i - 1].center);
        return std::isfinite(g) ? g : 1.0;
    };

    auto deconvolve_record = [&](StagedLineRecord& rec) {
        lineshape::VoigtPeak measured{std::max(rec.area, 1e-300), rec.center_nm,
                                      rec.measured_wg_nm, rec.measured_wl_nm};
        try {
            const auto dec = lineshape::deconvolve_instrument(measured, irf);
            rec.wg_nm = dec.peak.gaussian_fwhm_nm;
            rec.wl_nm = dec.peak.lorentzian_fwhm_nm;
            rec.resolution_limited = dec.resolution_limited();
        } catch (const BelowResolution& e) {
            rec.wg_nm = 0.0;
            rec.wl_nm = std::max(rec.measured_wl_nm - irf.lorentzian_fwhm_nm, 0.0);
            rec.resolution_limited = true;
            out.warnings.push_back("line " + std::to_string(rec.line_index) + " at " +
                                   std::to_string(rec.temperature_K) +
                                   " K below instrument resolution (deficit " +
                                   std::to_string(e.deficit_nm) + " nm)");
        }
        rec.wg_GHz = units::convert_delta(rec.wg_nm, units::Unit::nm, units::Unit::GHz, rec.center_nm);
        rec.wl_GHz = units::convert_delta(rec.wl_nm, units::Unit::nm, units::Unit::GHz, rec.center_nm);
    };

    std::vector<std::vector<double>> stage1_wg(lines.size());

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& spec = series[si];
        const double temperature = *spec.temperature_K;
        const bool stage1 = temperature <= t_low_max_K;

        if (!stage1 && out.line_mean_measured_wg_nm.empty()) {
            // entering stage 2: freeze per-line means from stage 1
            for (std::size_t li = 0; li < lines.size(); ++li) {
                const auto& ws = stage1_wg[li];
                if (ws.empty()) {
                    out.line_mean_measured_wg_nm.push_back(lines[li].wg);
                    out.warnings.push_back("line " + std::to_string(li) +
                                           " has no stage-1 widths; using its seed width");
                } else {
                    double m = 0.0;
                    for (double w : ws) m += w;
                    out.line_mean_measured_wg_nm.push_back(m / static_cast<double>(ws.size()));
                }
            }
        }

        PeakFitConfig cfg;
        cfg.weighting = options.weighting;
        cfg.baseline = BaselineModel::constant;
        cfg.baseline_offset_init = *std::min_element(spec.counts.begin(), spec.counts.end());

        const double bound = 0.45 * min_gap();
        std::vector<std::size_t> fitted_lines;
        for (std::size_t li = 0; li < lines.size(); ++li) {
            auto& ln = lines[li];
            if (!ln.present) continue;
            PeakConfig pc;
            const double predicted = ln.center + ln.step;
            pc.init = {std::max(ln.area, 1e-12), predicted,
                       stage1 ? ln.wg : out.line_mean_measured_wg_nm[li],
                       stage1 ? irf.lorentzian_fwhm_nm : std::max(ln.wl, 1e-4)};
            pc.center.lower = predicted - bound;
            pc.center.upper = predicted + bound;
            if (stage1) {
                pc.lorentzian_fwhm.fixed = true;
            } else {
                pc.gaussian_fwhm.fixed = true;
            }
            cfg.peaks.push_back(pc);
            fitted_lines.push_back(li);
        }
        if (cfg.peaks.empty()) {
            out.warnings.push_back("all lines lost before " + std::to_string(temperature) + " K");
            break;
        }

        const FitResult fit = fit_spectrum(spec, cfg);
        out.per_spectrum_reduced_chi2.push_back(fit.reduced_chi2);
        out.fits.push_back({temperature, spec.label, stage1 ? 1 : 2, fit.peaks,
                            fit.baseline_offset, fit.reduced_chi2, fit.converged});
        for (const auto& w : fit.warnings)
            out.warnings.push_back(spec.label.empty()
                                       ? "at " + std::to_string(temperature) + " K: " + w
                                       : spec.label + ": " + w);
        if (!stage1 && fit.reduced_chi2 > options.chi2_flag_threshold)
            out.warnings.push_back("stage-2 reduced chi2 " + std::to_string(fit.reduced_chi2) +
                                   " at " + std::to_string(temperature) +
                                   " K: fixed w_G may be biased");

        // Ambiguity check: two lines within one linewidth of each other.
        for (std::size_t a = 0; a + 1 < fit.peaks.size(); ++a) {
            const double fw = std::max(
                lineshape::voigt_fwhm(std::max(fit.peaks[a].gaussian_fwhm_nm, 1e-12),
                                      fit.peaks[a].lorentzian_fwhm_nm),
                lineshape::voigt_fwhm(std::max(fit.peaks[a + 1].gaussian_fwhm_nm, 1e-12),
                                      fit.peaks[a + 1].lorentzian_fwhm_nm));
            if (fit.peaks[a + 1].center_nm - fit.peaks[a].center_nm < fw)
                out.warnings.push_back("lines " + std::to_string(fitted_lines[a]) + " and " +
                                       std::to_string(fitted_lines[a + 1]) + " within one FWHM at " +
                                       std::to_string(temperature) + " K: correspondence ambiguous");
        }

        for (std::size_t idx = 0; idx < fitted_lines.size(); ++idx) {
            const std::size_t li = fitted_lines[idx];
            auto& ln = lines[li];
            const auto& pk = fit.peaks[idx];

            StagedLineRecord rec;
            rec.line_index = li;
            rec.temperature_K = temperature;
            rec.stage = stage1 ? 1 : 2;
            rec.center_nm = pk.center_nm;
            rec.area = pk.area;
            rec.measured_wg_nm = pk.gaussian_fwhm_nm;
            rec.measured_wl_nm = pk.lorentzian_fwhm_nm;

            if (pk.area < options.lost_area_fraction * ln.area_ref) {
                ln.present = false;
                rec.present = false;
                out.warnings.push_back("line " + std::to_string(li) + " lost at " +
                                       std::to_string(temperature) + " K (vanishing amplitude)");
                out.records.push_back(rec);
                continue;
            }

            deconvolve_record(rec);
            out.records.push_back(rec);

            if (stage1) stage1_wg[li].push_back(pk.gaussian_fwhm_nm);
            ln.step = pk.center_nm - ln.center;
            ln.center = pk.center_nm;
            ln.area = pk.area;
            ln.wg = pk.gaussian_fwhm_nm;
            if (!stage1) ln.wl = pk.lorentzian_fwhm_nm;
        }
    }

    // Degenerate series entirely below t_low_max: stage-1 means are still useful output.
    if (out.line_mean_measured_wg_nm.empty()) {
        for (std::size_t li = 0; li < lines.size(); ++li) {
            const auto& ws = stage1_wg[li];
            double m = 0.0;
            for (double w : ws) m += w;
            out.line_mean_measured_wg_nm.push_back(ws.empty() ? 0.0
                                                              : m / static_cast<double>(ws.size()));
        }
    }
    return out;
}

struct DiffusionStats {
    std::size_t line_index = 0;
    std::size_t n_points = 0;
    double mean_GHz = 0.0;
    double stddev_GHz = 0.0;
    bool stddev_defined = false;
};

/// Mean and sample standard deviation of one line's widths. A single
/// point leaves the standard deviation undefined (flagged).
inline DiffusionStats width_stats(const std::vector<double>& widths_GHz) {
    DiffusionStats st;
    st.n_points = widths_GHz.size();
    if (widths_GHz.empty()) return st;
    double m = 0.0;
    for (double w : widths_GHz) m += w;
    st.mean_GHz = m / static_cast<double>(widths_GHz.size());
    if (widths_GHz.size() >= 2) {
        double ss = 0.0;
        for (double w : widths_GHz) ss += (w - st.mean_GHz) * (w - st.mean_GHz);
        st.stddev_GHz = std::sqrt(ss / static_cast<double>(widths_GHz.size() - 1));
        st.stddev_defined = true;
    }
    return st;
}

/// Spectral-diffusion statistics: per-line mean and sample standard
/// deviation of the deconvolved stage-1 Gaussian widths.
inline std::vector<DiffusionStats> diffusion_stats(const StagedSeriesResult& staged) {
    std::vector<DiffusionStats> out;
    for (std::size_t li = 0; li < staged.line_count; ++li) {
        std::vector<double> widths;
        for (const auto& rec : staged.records)
            if (rec.line_index == li && rec.stage == 1 && rec.present)
                widths.push_back(rec.wg_GHz);
        auto st = width_stats(widths);
        st.line_index = li;
        out.push_back(st);
    }
    return out;
}

}  // namespace sivspec::specfit
