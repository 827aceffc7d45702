#pragma once

// Gaussian / Lorentzian / Voigt line profiles, instrument-response
// composition and removal. All profiles are area-normalized: the peak
// integrates to `area` over the full axis.
//
// The Voigt profile is evaluated through the Faddeeva function
//   V(l) = A * Re w(x + iy) / (sigma * sqrt(2 pi)),
//   x = (l - lc) / (sigma sqrt 2),  y = gamma / (sigma sqrt 2),
// with sigma = w_G / sqrt(8 ln 2) and gamma = w_L / 2. Below a width
// ratio of 1e-6 the evaluation falls back to the exact pure-Gaussian /
// pure-Lorentzian forms.

#include <cmath>
#include <limits>

#include "sivspec/errors.hpp"
#include "sivspec/faddeeva.hpp"

namespace sivspec::lineshape {

using math::kLn2;
using math::kPi;
using math::kSqrt2;

/// Width ratio below which a Voigt profile is evaluated as its pure limit.
inline constexpr double kPureLimitRatio = 1e-6;

/// Default clamp tolerance for deconvolution: a fitted width up to this
/// fraction below the instrument width clamps to zero instead of failing.
inline constexpr double kDeconvClampTol = 0.05;

struct VoigtPeak {
    double area = 1.0;             // integrated intensity * nm
    double center_nm = 0.0;        // peak position
    double gaussian_fwhm_nm = 0.0;
    double lorentzian_fwhm_nm = 0.0;

    void validate() const {
        if (!(std::isfinite(area) && std::isfinite(center_nm) &&
              std::isfinite(gaussian_fwhm_nm) && std::isfinite(lorentzian_fwhm_nm)))
            throw InvalidInput("VoigtPeak: non-finite field");
        if (!(area > 0.0)) throw InvalidInput("VoigtPeak: area must be > 0");
        if (!(center_nm > 0.0)) throw InvalidInput("VoigtPeak: center must be > 0");
        if (gaussian_fwhm_nm < 0.0 || lorentzian_fwhm_nm < 0.0)
            throw InvalidInput("VoigtPeak: negative width");
        if (gaussian_fwhm_nm == 0.0 && lorentzian_fwhm_nm == 0.0)
            throw DegenerateProfile("VoigtPeak: both widths zero");
    }
};

struct InstrumentProfile {
    double gaussian_fwhm_nm = 0.0;
    double lorentzian_fwhm_nm = 0.0;

    void validate() const {
        if (!(std::isfinite(gaussian_fwhm_nm) && std::isfinite(lorentzian_fwhm_nm)))
            throw InvalidInput("InstrumentProfile: non-finite width");
        if (gaussian_fwhm_nm < 0.0 || lorentzian_fwhm_nm < 0.0)
            throw InvalidInput("InstrumentProfile: negative width");
    }

    bool ideal() const { return gaussian_fwhm_nm == 0.0 && lorentzian_fwhm_nm == 0.0; }
};

/// Area-normalized Gaussian with FWHM w, evaluated at offset d from center.
inline double gaussian_profile(double area, double fwhm, double d) {
    const double s = 2.0 * std::sqrt(kLn2 / kPi) / fwhm;
    const double u = d / fwhm;
    return area * s * std::exp(-4.0 * kLn2 * u * u);
}

/// Area-normalized Lorentzian with FWHM w, evaluated at offset d.
inline double lorentzian_profile(double area, double fwhm, double d) {
    const double u = 2.0 * d / fwhm;
    return area * 2.0 / (kPi * fwhm * (1.0 + u * u));
}

inline double voigt_eval(const VoigtPeak& peak, double lambda_nm) {
    peak.validate();
    if (!std::isfinite(lambda_nm)) throw InvalidInput("voigt_eval: non-finite wavelength");

    const double d = lambda_nm - peak.center_nm;
    const double wg = peak.gaussian_fwhm_nm;
    const double wl = peak.lorentzian_fwhm_nm;

    if (wl <= kPureLimitRatio * wg) return gaussian_profile(peak.area, wg, d);
    if (wg <= kPureLimitRatio * wl) return lorentzian_profile(peak.area, wl, d);

    const double sigma = wg / std::sqrt(8.0 * kLn2);
    const double x = d / (sigma * kSqrt2);
    const double y = 0.5 * wl / (sigma * kSqrt2);
    return peak.area * math::voigt_kernel(x, y) / (sigma * std::sqrt(2.0 * kPi));
}

/// Derivative of voigt_eval with respect to wavelength.
inline double voigt_eval_dlambda(const VoigtPeak& peak, double lambda_nm) {
    peak.validate();
    const double d = lambda_nm - peak.center_nm;
    const double wg = peak.gaussian_fwhm_nm;
    const double wl = peak.lorentzian_fwhm_nm;

    if (wl <= kPureLimitRatio * wg)
        return gaussian_profile(peak.area, wg, d) * (-8.0 * kLn2 * d / (wg * wg));
    if (wg <= kPureLimitRatio * wl) {
        const double u = 2.0 * d / wl;
        return -lorentzian_profile(peak.area, wl, d) * 2.0 * u / (wl * (1.0 + u * u)) * 2.0;
    }

    const double sigma = wg / std::sqrt(8.0 * kLn2);
    const double x = d / (sigma * kSqrt2);
    const double y = 0.5 * wl / (sigma * kSqrt2);
    return peak.area * math::voigt_kernel_dx(x, y) /
           (sigma * std::sqrt(2.0 * kPi) * sigma * kSqrt2);
}

/// FWHM of a Voigt profile. Olivero-Longbothum seed
///   0.5346 w_L + sqrt(0.2166 w_L^2 + w_G^2)
/// polished by Newton iterations on the half-maximum equation, so the
/// result tracks the numeric root to well below fit uncertainty.
inline double voigt_fwhm(double gaussian_fwhm, double lorentzian_fwhm) {
    if (!(std::isfinite(gaussian_fwhm) && std::isfinite(lorentzian_fwhm)))
        throw InvalidInput("voigt_fwhm: non-finite width");
    if (gaussian_fwhm < 0.0 || lorentzian_fwhm < 0.0)
        throw InvalidInput("voigt_fwhm: negative width");
    if (gaussian_fwhm == 0.0 && lorentzian_fwhm == 0.0)
        throw DegenerateProfile("voigt_fwhm: both widths zero");
    if (lorentzian_fwhm == 0.0) return gaussian_fwhm;
    if (gaussian_fwhm == 0.0) return lorentzian_fwhm;

    const double wg = gaussian_fwhm, wl = lorentzian_fwhm;
    const double seed =
        0.5346 * wl + std::sqrt(0.2166 * wl * wl + wg * wg);

    const double sigma = wg / std::sqrt(8.0 * kLn2);
    const double y = 0.5 * wl / (sigma * kSqrt2);
    const double half = 0.5 * math::voigt_kernel(0.0, y);

    double d = 0.5 * seed / (sigma * kSqrt2);  // half-width in kernel coords
    for (int i = 0; i < 4; ++i) {
        const double f = math::voigt_kernel(d, y) - half;
        const double fp = math::voigt_kernel_dx(d, y);
        if (fp == 0.0) break;
        const double step = f / fp;
        d -= step;
        if (std::abs(step) < 1e-14 * d) break;
    }
    return 2.0 * d * sigma * kSqrt2;
}

/// Composition with the instrument response: Gaussian widths add in
/// quadrature, Lorentzian widths add linearly; area and center unchanged.
inline VoigtPeak convolve_instrument(const VoigtPeak& intrinsic, const InstrumentProfile& irf) {
    intrinsic.validate();
    irf.validate();
    VoigtPeak out = intrinsic;
    out.gaussian_fwhm_nm = std::hypot(intrinsic.gaussian_fwhm_nm, irf.gaussian_fwhm_nm);
    out.lorentzian_fwhm_nm = intrinsic.lorentzian_fwhm_nm + irf.lorentzian_fwhm_nm;
    return out;
}

struct DeconvolutionResult {
    VoigtPeak peak;
    bool gaussian_resolution_limited = false;
    bool lorentzian_resolution_limited = false;

    bool resolution_limited() const {
        return gaussian_resolution_limited || lorentzian_resolution_limited;
    }
};

/// Inverse of convolve_instrument. A measured width below the instrument
/// width clamps to zero when the deficit is within `clamp_tol` of the
/// instrument width (flagged resolution-limited); a larger deficit throws
/// BelowResolution carrying the deficit.
inline DeconvolutionResult deconvolve_instrument(const VoigtPeak& measured,
                                                 const InstrumentProfile& irf,
                                                 double clamp_tol = kDeconvClampTol) {
    measured.validate();
    irf.validate();

    DeconvolutionResult out{measured};

    const double mg = measured.gaussian_fwhm_nm, ig = irf.gaussian_fwhm_nm;
    if (mg >= ig) {
        out.peak.gaussian_fwhm_nm = std::sqrt(mg * mg - ig * ig);
    } else if (mg >= (1.0 - clamp_tol) * ig) {
        out.peak.gaussian_fwhm_nm = 0.0;
        out.gaussian_resolution_limited = true;
    } else {
        throw BelowResolution("deconvolve_instrument: Gaussian width below instrument response",
                              ig - mg);
    }

    const double ml = measured.lorentzian_fwhm_nm, il = irf.lorentzian_fwhm_nm;
    if (ml >= il) {
        out.peak.lorentzian_fwhm_nm = ml - il;
    } else if (ml >= (1.0 - clamp_tol) * il) {
        out.peak.lorentzian_fwhm_nm = 0.0;
        out.lorentzian_resolution_limited = true;
    } else {
        throw BelowResolution("deconvolve_instrument: Lorentzian width below instrument response",
                              il - ml);
    }

    return out;
}

}  // namespace sivspec::lineshape
