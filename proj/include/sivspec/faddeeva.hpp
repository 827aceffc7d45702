#pragma once

// Complex error function w(z) = exp(-z^2) erfc(-iz) on the closed upper
// half-plane, the scaled complementary error function erfcx, and the
// Voigt kernel K(x,y) = Re w(x + iy).
//
// Two regimes:
//   |z| <  16 : Weideman's rational approximation (SIAM J. Numer. Anal.
//               31, 1994) with N = 40 terms; coefficients are built once
//               at first use via the DFT construction from that paper.
//   |z| >= 16 : Laplace continued fraction, 12 convergents.

#include <array>
#include <cmath>
#include <complex>
#include <limits>

#include "sivspec/errors.hpp"

namespace sivspec::math {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kLn2 = 0.69314718055994530942;

namespace detail {

inline constexpr int kWeidemanN = 40;

inline const std::array<double, kWeidemanN>& weideman_coeffs() {
    static const std::array<double, kWeidemanN> coeffs = [] {
        constexpr int n = kWeidemanN;
        constexpr int m = 2 * n;
        constexpr int m2 = 2 * m;
        const double ell = std::sqrt(n / kSqrt2);

        // Sample f(t) = exp(-t^2) (L^2 + t^2) on the tangent grid,
        // fftshifted so the DFT below reads off expansion coefficients.
        std::array<double, m2> shifted{};
        for (int k = -m + 1; k <= m - 1; ++k) {
            const double theta = k * kPi / m;
            const double t = ell * std::tan(theta / 2.0);
            const int idx = k + m;  // pre-shift position, idx in [1, 2m-1]
            shifted[(idx + m) % m2] = std::exp(-t * t) * (ell * ell + t * t);
        }

        std::array<double, kWeidemanN> out{};
        for (int j = 1; j <= n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m2; ++i)
                acc += shifted[i] * std::cos(2.0 * kPi * j * i / m2);
            out[n - j] = acc / m2;  // highest degree first
        }
        return out;
    }();
    return coeffs;
}

inline std::complex<double> faddeeva_weideman(std::complex<double> z) {
    constexpr int n = kWeidemanN;
    const double ell = std::sqrt(n / kSqrt2);
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> denom = ell - iz;
    const std::complex<double> big_z = (ell + iz) / denom;

    const auto& a = weideman_coeffs();
    std::complex<double> p = a[0];
    for (int i = 1; i < n; ++i) p = p * big_z + a[i];

    return 2.0 * p / (denom * denom) + (1.0 / kSqrtPi) / denom;
}

inline std::complex<double> faddeeva_contfrac(std::complex<double> z) {
    std::complex<double> r = 0.0;
    for (int k = 12; k >= 1; --k) r = (0.5 * k) / (z - r);
    return std::complex<double>(0.0, 1.0 / kSqrtPi) / (z - r);
}

}  // namespace detail

/// w(z) for Im(z) >= 0.
inline std::complex<double> faddeeva_w(std::complex<double> z) {
    if (!(std::isfinite(z.real()) && std::isfinite(z.imag())))
        throw InvalidInput("faddeeva_w: non-finite argument");
    if (z.imag() < 0.0)
        throw InvalidInput("faddeeva_w: argument below the real axis");
    if (std::norm(z) >= 256.0) return detail::faddeeva_contfrac(z);
    return detail::faddeeva_weideman(z);
}

/// Voigt kernel K(x,y) = Re w(x + iy), y >= 0.
inline double voigt_kernel(double x, double y) {
    return faddeeva_w({x, y}).real();
}

/// d/dx Re w(x + iy) = -2 (x K - y L) with L = Im w.
inline double voigt_kernel_dx(double x, double y) {
    const auto w = faddeeva_w({x, y});
    return -2.0 * (x * w.real() - y * w.imag());
}

/// exp(x^2) erfc(x). Overflows to +inf below x ~ -26.6.
inline double erfcx(double x) {
    if (x >= 0.0) return faddeeva_w({0.0, x}).real();
    const double xx = x * x;
    if (xx > 709.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(xx) - faddeeva_w({0.0, -x}).real();
}

}  // namespace sivspec::math
