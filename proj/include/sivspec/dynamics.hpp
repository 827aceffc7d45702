#pragma once

// Three-level emitter population dynamics: ground (1), excited (2) and a
// metastable shelf (3). Pumping k12 = sigma * P, decay k21, shelving k23
// and an intensity-dependent de-shelving rate
//   k31(P) = d P / (P + c) + k31_0.
//
// The normalized intensity autocorrelation after an emission is exactly
// bi-exponential,
//   g2(tau) = 1 - (1 + a) exp(-|tau|/tau1) + a exp(-|tau|/tau2),
// with 1/tau1, 1/tau2 the nonzero relaxation eigenvalues of the rate
// generator and the amplitude fixed by the ground-state initial
// condition. Rates are in MHz, powers in uW, delays in ns.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sivspec/errors.hpp"
#include "sivspec/faddeeva.hpp"
#include "sivspec/levmar.hpp"

namespace sivspec::dynamics {

using math::kPi;
using math::kSqrt2;

struct RateCoefficients {
    double k21_MHz = 0.0;       // radiative decay 2 -> 1
    double k23_MHz = 0.0;       // shelving 2 -> 3
    double k31_0_MHz = 0.0;     // spontaneous de-shelving 3 -> 1
    double d_MHz = 0.0;         // de-shelving gain at saturation
    double sigma_MHz_per_uW = 0.0;  // pump rate per unit power
    double c_uW = 0.0;          // de-shelving saturation power

    void validate() const {
        const double fields[] = {k21_MHz, k23_MHz, k31_0_MHz, d_MHz, sigma_MHz_per_uW, c_uW};
        for (double f : fields)
            if (!std::isfinite(f) || f < 0.0)
                throw InvalidInput("RateCoefficients: fields must be finite and >= 0");
        if (!(k21_MHz > 0.0)) throw InvalidInput("RateCoefficients: k21 must be > 0");
        if (d_MHz > 0.0 && !(c_uW > 0.0))
            throw InvalidInput("RateCoefficients: c must be > 0 when d > 0");
    }
};

struct G2Params {
    double a = 0.0;        // bunching amplitude
    double tau1_ns = 1.0;  // antibunching time constant
    double tau2_ns = 1.0;  // bunching time constant

    void validate() const {
        if (!(std::isfinite(a) && a >= 0.0)) throw InvalidInput("G2Params: a must be finite, >= 0");
        if (!(tau1_ns > 0.0) || !(tau2_ns > 0.0))
            throw InvalidInput("G2Params: time constants must be > 0");
        if (tau2_ns < tau1_ns) throw InvalidInput("G2Params: tau2 must be >= tau1");
    }
};

struct G2Curve {
    std::vector<double> delays_ns;  // sorted, may be negative
    std::vector<double> values;
    double bin_width_ns = 0.0;

    void validate() const {
        if (delays_ns.size() != values.size()) throw InvalidInput("G2Curve: length mismatch");
        if (delays_ns.empty()) throw InvalidInput("G2Curve: empty");
        for (std::size_t i = 0; i < delays_ns.size(); ++i) {
            if (!std::isfinite(values[i]) || values[i] < 0.0)
                throw InvalidInput("G2Curve: values must be finite and >= 0");
            if (i > 0 && delays_ns[i] < delays_ns[i - 1])
                throw InvalidInput("G2Curve: delays must be sorted");
        }
    }
};

struct MeasurementModel {
    double irf_fwhm_ns = 0.0;     // Gaussian timing jitter, FWHM
    double signal_fraction = 1.0; // rho: signal / (signal + background)

    void validate() const {
        if (!(irf_fwhm_ns >= 0.0)) throw InvalidInput("MeasurementModel: irf_fwhm must be >= 0");
        if (!(signal_fraction >= 0.0 && signal_fraction <= 1.0))
            throw InvalidInput("MeasurementModel: signal fraction must be in [0,1]");
    }
};

struct SaturationFit {
    double p_sat_uW = 0.0;
    double i_inf_Mcps = 0.0;
};

/// De-shelving rate at excitation power P.
inline double k31(const RateCoefficients& r, double power_uW) {
    r.validate();
    if (!(power_uW >= 0.0)) throw InvalidInput("k31: power must be >= 0");
    const double pumped = r.d_MHz > 0.0 ? r.d_MHz * power_uW / (power_uW + r.c_uW) : 0.0;
    return pumped + r.k31_0_MHz;
}

/// Steady-state occupations (rho1, rho2, rho3), normalized to 1.
inline std::array<double, 3> steady_state(const RateCoefficients& r, double power_uW) {
    r.validate();
    if (!(power_uW >= 0.0)) throw InvalidInput("steady_state: power must be >= 0");
    const double k12 = r.sigma_MHz_per_uW * power_uW;
    if (k12 == 0.0) return {1.0, 0.0, 0.0};

    const double deshelve = k31(r, power_uW);
    if (r.k23_MHz == 0.0) {
        const double rho2 = k12 / (k12 + r.k21_MHz);
        return {1.0 - rho2, rho2, 0.0};
    }
    if (deshelve == 0.0) return {0.0, 0.0, 1.0};  // shelf is absorbing

    const double q1 = (r.k21_MHz + r.k23_MHz) * deshelve;
    const double q2 = k12 * deshelve;
    const double q3 = k12 * r.k23_MHz;
    const double norm = q1 + q2 + q3;
    return {q1 / norm, q2 / norm, q3 / norm};
}

/// Detected-rate proxy k21 * rho2 in MHz.
inline double emission_rate_MHz(const RateCoefficients& r, double power_uW) {
    return r.k21_MHz * steady_state(r, power_uW)[1];
}

/// Correlation parameters from the rate model at excitation power P,
/// via the nonzero eigenvalues of the generator restricted to the
/// zero-sum subspace and the ground-state initial condition.
inline G2Params g2_from_rates(const RateCoefficients& r, double power_uW) {
    r.validate();
    if (!(power_uW > 0.0)) throw InvalidInput("g2_from_rates: power must be > 0");

    const double k12 = r.sigma_MHz_per_uW * power_uW;
    const double k21 = r.k21_MHz, k23 = r.k23_MHz;
    const double deshelve = k31(r, power_uW);
    if (!(k12 > 0.0)) throw InvalidInput("g2_from_rates: zero pump rate (sigma = 0)");

    if (k23 == 0.0) {
        // Two-level limit: the shelf decouples and carries no amplitude.
        const double fast = k12 + k21;
        const double tau1 = 1e3 / fast;
        const double tau2 = (deshelve > 0.0 && deshelve < fast) ? 1e3 / deshelve : tau1;
        return {0.0, tau1, tau2};
    }
    if (deshelve == 0.0)
        throw DegenerateDynamics("g2_from_rates: shelf is absorbing (k31 = 0), no steady emission");

    const double b = k12 + k21 + k23 + deshelve;
    const double cc = k12 * k23 + deshelve * (k12 + k21 + k23);
    const double disc = b * b - 4.0 * cc;
    if (disc < 0.0)
        throw DegenerateDynamics("g2_from_rates: complex relaxation eigenvalues");
    const double sqrt_disc = std::sqrt(disc);
    const double fast = 0.5 * (b + sqrt_disc);
    const double slow = cc / fast;  // product of roots, avoids cancellation
    if (fast - slow < 1e-9 * fast)
        throw DegenerateDynamics("g2_from_rates: degenerate relaxation eigenvalues");

    // rho2(t) = rho2_inf + c_f exp(-fast t) + c_s exp(-slow t) with
    // rho2(0) = 0, rho2'(0) = k12; a = c_s / rho2_inf.
    const double k12_over_rho2inf = k12 + k21 + k23 + k12 * k23 / deshelve;
    double a = (k12_over_rho2inf - fast) / sqrt_disc;
    if (a < 0.0) {
        if (a < -1e-9)
            throw DegenerateDynamics("g2_from_rates: amplitudes outside the antibunching/bunching form");
        a = 0.0;
    }
    return {a, 1e3 / fast, 1e3 / slow};
}

/// g2(tau) = 1 - (1+a) exp(-|tau|/tau1) + a exp(-|tau|/tau2).
inline double g2_eval(const G2Params& p, double tau_ns) {
    p.validate();
    if (!std::isfinite(tau_ns)) throw InvalidInput("g2_eval: non-finite delay");
    const double t = std::abs(tau_ns);
    return 1.0 - (1.0 + p.a) * std::exp(-t / p.tau1_ns) + p.a * std::exp(-t / p.tau2_ns);
}

namespace detail {

/// Convolution of exp(-|t|/decay) with a Gaussian pdf of stddev sigma,
/// evaluated through erfcx to stay stable for all argument sizes.
inline double exp_gauss_conv(double tau, double decay, double sigma) {
    if (sigma == 0.0) return std::exp(-std::abs(tau) / decay);
    const double t = std::abs(tau);
    const double gauss = std::exp(-0.5 * t * t / (sigma * sigma));
    const double um = (sigma / decay - t / sigma) / kSqrt2;
    const double up = (sigma / decay + t / sigma) / kSqrt2;
    double term_minus;
    if (um >= 0.0) {
        term_minus = gauss * math::erfcx(um);
    } else {
        const double expo = 0.5 * sigma * sigma / (decay * decay) - t / decay;  // always < 0 here
        term_minus = 2.0 * std::exp(expo) - gauss * math::erfcx(-um);
    }
    return 0.5 * (term_minus + gauss * math::erfcx(up));
}

inline double g2_measured(const G2Params& p, const MeasurementModel& m, double tau_ns) {
    const double sigma = m.irf_fwhm_ns / std::sqrt(8.0 * math::kLn2);
    const double conv = 1.0 - (1.0 + p.a) * exp_gauss_conv(tau_ns, p.tau1_ns, sigma) +
                        p.a * exp_gauss_conv(tau_ns, p.tau2_ns, sigma);
    const double rho2 = m.signal_fraction * m.signal_fraction;
    return 1.0 + rho2 * (conv - 1.0);
}

}  // namespace detail

/// Instrument response and background applied to an ideal correlation:
/// convolve with the Gaussian timing jitter, then
/// g_meas = 1 + rho^2 (g_conv - 1).
inline G2Curve apply_measurement(const G2Params& p, const MeasurementModel& m,
                                 const std::vector<double>& delays_ns) {
    p.validate();
    m.validate();
    G2Curve out;
    out.delays_ns = delays_ns;
    out.values.reserve(delays_ns.size());
    for (double tau : delays_ns) out.values.push_back(detail::g2_measured(p, m, tau));
    return out;
}

struct G2FitResult {
    G2Params params;
    G2Params uncertainties;      // 1-sigma, same fields
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    double g2_zero_residual = 0.0;  // |model(0) - data nearest 0|
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Least-squares fit of the measured-correlation model to a curve.
inline G2FitResult fit_g2(const G2Curve& curve, const MeasurementModel& m, const G2Params& init) {
    curve.validate();
    m.validate();
    init.validate();

    const auto n = static_cast<Eigen::Index>(curve.delays_ns.size());
    auto residuals = [&](const Eigen::VectorXd& x) {
        const G2Params p{x[0], x[1], x[2]};
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i)
            r[i] = detail::g2_measured(p, m, curve.delays_ns[i]) - curve.values[i];
        return r;
    };

    fit::LMOptions opt;
    opt.lower = Eigen::Vector3d(0.0, 1e-6, 1e-6);
    opt.upper = Eigen::Vector3d(1e6, 1e9, 1e9);
    const auto lm = fit::levenberg_marquardt(
        residuals, Eigen::Vector3d(init.a, init.tau1_ns, init.tau2_ns), opt);

    G2FitResult out;
    out.params = {lm.params[0], lm.params[1], lm.params[2]};
    out.chi2 = lm.chi2;
    const auto dof = n > 3 ? n - 3 : 1;
    out.reduced_chi2 = lm.chi2 / static_cast<double>(dof);
    out.converged = lm.converged;
    out.iterations = lm.iterations;
    if (!lm.converged) out.warnings.push_back("fit did not converge: " + lm.message);

    const double scale = lm.chi2 / static_cast<double>(dof);
    out.uncertainties = {std::sqrt(std::max(0.0, lm.covariance(0, 0) * scale)),
                         std::sqrt(std::max(0.0, lm.covariance(1, 1) * scale)),
                         std::sqrt(std::max(0.0, lm.covariance(2, 2) * scale))};

    if (out.params.tau2_ns < out.params.tau1_ns) out.warnings.push_back("tau2 < tau1 after fit");
    if (out.params.tau2_ns > 0 && out.uncertainties.tau2_ns > 5.0 * out.params.tau2_ns)
        out.warnings.push_back("tau2 unconstrained by the data");
    if (out.params.a < 1e-4 || out.uncertainties.a > 5.0 * std::max(out.params.a, 1e-12))
        if (out.params.a < 1e-4) out.warnings.push_back("no detectable bunching (a ~ 0)");

    // Deviation at zero delay between model and the closest data point.
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < curve.delays_ns.size(); ++i)
        if (std::abs(curve.delays_ns[i]) < std::abs(curve.delays_ns[i0])) i0 = i;
    out.g2_zero_residual = std::abs(detail::g2_measured(out.params, m, 0.0) - curve.values[i0]);
    return out;
}

struct PowerPoint {
    double power_uW = 0.0;
    G2Params params;
    std::optional<G2Params> sigmas;  // per-observable 1-sigma uncertainties
};

struct RateExtraction {
    RateCoefficients rates;
    RateCoefficients uncertainties;
    double chi2 = 0.0;
    bool converged = false;
    std::vector<std::string> warnings;
};

namespace detail {

inline Eigen::VectorXd pack_sqrt(const RateCoefficients& r) {
    Eigen::VectorXd x(6);
    x << std::sqrt(r.k21_MHz), std::sqrt(r.k23_MHz), std::sqrt(r.k31_0_MHz),
        std::sqrt(r.d_MHz), std::sqrt(r.sigma_MHz_per_uW), std::sqrt(r.c_uW);
    return x;
}

inline RateCoefficients unpack_sqrt(const Eigen::VectorXd& x) {
    return {x[0] * x[0], x[1] * x[1], x[2] * x[2], x[3] * x[3], x[4] * x[4], x[5] * x[5]};
}

// Forward model without validation gates, for use inside the optimizer.
inline G2Params g2_forward(const RateCoefficients& r, double power_uW) {
    const double k12 = r.sigma_MHz_per_uW * power_uW;
    const double deshelve =
        (r.d_MHz > 0.0 ? r.d_MHz * power_uW / (power_uW + r.c_uW) : 0.0) + r.k31_0_MHz;
    const double b = k12 + r.k21_MHz + r.k23_MHz + deshelve;
    const double cc = k12 * r.k23_MHz + deshelve * (k12 + r.k21_MHz + r.k23_MHz);
    const double disc = std::max(b * b - 4.0 * cc, 0.0);
    const double sqrt_disc = std::sqrt(disc);
    const double fast = 0.5 * (b + sqrt_disc);
    const double slow = fast > 0.0 ? cc / fast : 0.0;
    double a = 0.0;
    if (r.k23_MHz > 0.0 && deshelve > 0.0 && sqrt_disc > 0.0) {
        const double k12_over_rho2inf =
            k12 + r.k21_MHz + r.k23_MHz + k12 * r.k23_MHz / deshelve;
        a = std::max(0.0, (k12_over_rho2inf - fast) / sqrt_disc);
    }
    return {a, fast > 0.0 ? 1e3 / fast : 1e30, slow > 0.0 ? 1e3 / slow : 1e30};
}

}  // namespace detail

/// Global weighted least squares over all powers: fit the six rate
/// coefficients so the model-predicted (a, tau1, tau2) match the
/// measured triples. Residuals are normalized by reported uncertainties
/// or, when absent, by observable magnitude.
inline RateExtraction extract_rates(const std::vector<PowerPoint>& points,
                                    std::optional<double> lifetime_hint_ns = std::nullopt) {
    std::vector<double> powers;
    for (const auto& pt : points) {
        pt.params.validate();
        if (!(pt.power_uW > 0.0)) throw InvalidInput("extract_rates: powers must be > 0");
        if (!std::count(powers.begin(), powers.end(), pt.power_uW)) powers.push_back(pt.power_uW);
    }
    if (powers.size() < 4)
        throw InvalidInput("extract_rates: need at least 4 distinct excitation powers");

    auto residuals = [&](const Eigen::VectorXd& x) {
        const RateCoefficients r = detail::unpack_sqrt(x);
        Eigen::VectorXd res(3 * points.size());
        Eigen::Index k = 0;
        for (const auto& pt : points) {
            const G2Params model = detail::g2_forward(r, pt.power_uW);
            const double sa = pt.sigmas ? pt.sigmas->a : std::max(std::abs(pt.params.a), 0.01);
            const double s1 = pt.sigmas ? pt.sigmas->tau1_ns : pt.params.tau1_ns;
            const double s2 = pt.sigmas ? pt.sigmas->tau2_ns : pt.params.tau2_ns;
            res[k++] = (model.a - pt.params.a) / sa;
            res[k++] = (model.tau1_ns - pt.params.tau1_ns) / s1;
            res[k++] = (model.tau2_ns - pt.params.tau2_ns) / s2;
        }
        return res;
    };

    // Heuristic seed: 1/tau1 is nearly linear in P (slope sigma, intercept
    // k21 + k23); the tau2 extremes bracket the de-shelving rates.
    double sxx = 0, sx = 0, sy = 0, sxy = 0;
    double tau2_max = 0, tau2_min = 1e300, a_max = 0;
    for (const auto& pt : points) {
        const double y = 1e3 / pt.params.tau1_ns;  // MHz
        sx += pt.power_uW;
        sy += y;
        sxx += pt.power_uW * pt.power_uW;
        sxy += pt.power_uW * y;
        tau2_max = std::max(tau2_max, pt.params.tau2_ns);
        tau2_min = std::min(tau2_min, pt.params.tau2_ns);
        a_max = std::max(a_max, pt.params.a);
    }
    const double npts = static_cast<double>(points.size());
    const double denom = npts * sxx - sx * sx;
    double sigma0 = denom > 0 ? (npts * sxy - sx * sy) / denom : 1.0;
    double rsum0 = (sy - sigma0 * sx) / npts;
    sigma0 = std::max(sigma0, 1e-6);
    rsum0 = std::max(rsum0, 1e-3);
    if (lifetime_hint_ns && *lifetime_hint_ns > 0.0) rsum0 = 1e3 / *lifetime_hint_ns;

    const double k31_00 = 1e3 / tau2_max;
    const double d0 = std::max(1e3 / tau2_min - k31_00, 0.01 * k31_00 + 1e-6);
    std::vector<double> sorted_powers = powers;
    std::sort(sorted_powers.begin(), sorted_powers.end());
    const double c0 = sorted_powers[sorted_powers.size() / 2];
    const double k23_0 = std::clamp(a_max * (k31_00 + d0), 1e-9, 0.5 * rsum0);

    std::vector<RateCoefficients> seeds;
    for (double shelf_scale : {1.0, 0.25, 4.0})
        seeds.push_back({rsum0 - k23_0, k23_0 * shelf_scale, k31_00, d0 * shelf_scale, sigma0,
                         c0 * shelf_scale});

    fit::LMOptions opt;
    opt.max_iterations = 600;
    std::optional<fit::LMResult> best;
    for (const auto& seed : seeds) {
        const auto lm = fit::levenberg_marquardt(residuals, detail::pack_sqrt(seed), opt);
        if (!best || lm.chi2 < best->chi2) best = lm;
    }

    RateExtraction out;
    out.rates = detail::unpack_sqrt(best->params);
    out.chi2 = best->chi2;
    out.converged = best->converged;
    if (!best->converged) out.warnings.push_back("fit did not converge: " + best->message);

    // sqrt-space covariance -> parameter covariance via d(theta^2) = 2 theta.
    const auto dof = std::max<Eigen::Index>(1, 3 * static_cast<Eigen::Index>(points.size()) - 6);
    const double scale = best->chi2 / static_cast<double>(dof);
    auto sig = [&](int i) {
        const double dtheta = 2.0 * std::abs(best->params[i]);
        return dtheta * std::sqrt(std::max(0.0, best->covariance(i, i) * scale));
    };
    out.uncertainties = {sig(0), sig(1), sig(2), sig(3), sig(4), sig(5)};

    const double pmax = *std::max_element(powers.begin(), powers.end());
    const bool shelving_negligible = a_max < 0.02 || out.rates.k23_MHz < 1e-4 * out.rates.k21_MHz;
    if (shelving_negligible)
        out.warnings.push_back("shelving negligible (a ~ 0): d and c unidentifiable");
    if (out.rates.c_uW > 0.0 && pmax < 0.2 * out.rates.c_uW)
        out.warnings.push_back("all powers below 0.2*c: d and c unidentifiable");
    if (out.rates.d_MHz > 0.0 && out.uncertainties.d_MHz > out.rates.d_MHz)
        out.warnings.push_back("d poorly constrained (relative sigma > 1)");
    if (out.rates.c_uW > 0.0 && out.uncertainties.c_uW > out.rates.c_uW)
        out.warnings.push_back("c poorly constrained (relative sigma > 1)");
    return out;
}

struct DynamicLimits {
    double tau1_0_ns = 0.0;   // excited-state lifetime estimate
    double tau2_0_ns = 0.0;
    double tau2_inf_ns = 0.0;
    double a_inf = 0.0;
    bool converged = true;
};

/// Limiting correlation parameters for vanishing and infinite excitation
/// power, from the forward model at extreme powers with a Richardson
/// consistency check.
inline DynamicLimits predicted_limits(const RateCoefficients& r) {
    r.validate();
    const double pref = r.c_uW > 0.0
                            ? r.c_uW
                            : (r.sigma_MHz_per_uW > 0.0 ? r.k21_MHz / r.sigma_MHz_per_uW : 1.0);

    DynamicLimits out;

    // P -> 0: observables are linear in P, extrapolate from two points.
    const G2Params lo1 = detail::g2_forward(r, 1e-6 * pref);
    const G2Params lo2 = detail::g2_forward(r, 2e-6 * pref);
    out.tau1_0_ns = 2.0 * lo1.tau1_ns - lo2.tau1_ns;
    out.tau2_0_ns = 2.0 * lo1.tau2_ns - lo2.tau2_ns;
    if (std::abs(lo1.tau1_ns - lo2.tau1_ns) > 1e-4 * lo1.tau1_ns) out.converged = false;

    // P -> inf: observables approach the limit as 1/P.
    const double p1 = 1e6 * pref, p2 = 5e5 * pref;
    const G2Params hi1 = detail::g2_forward(r, p1);
    const G2Params hi2 = detail::g2_forward(r, p2);
    const double beta_tau2 = (hi2.tau2_ns - hi1.tau2_ns) / (1.0 / p2 - 1.0 / p1);
    out.tau2_inf_ns = hi1.tau2_ns - beta_tau2 / p1;
    const double beta_a = (hi2.a - hi1.a) / (1.0 / p2 - 1.0 / p1);
    out.a_inf = hi1.a - beta_a / p1;
    if (std::abs(hi1.tau2_ns - hi2.tau2_ns) > 1e-4 * std::abs(hi1.tau2_ns)) out.converged = false;

    return out;
}

/// Fourier-limited linewidth 1/(2 pi tau) in GHz for tau in ns.
inline double lifetime_linewidth_GHz(double tau_ns) {
    if (!(tau_ns > 0.0)) throw InvalidInput("lifetime_linewidth: tau must be > 0");
    return 1.0 / (2.0 * kPi * tau_ns);
}

struct SaturationFitResult {
    SaturationFit fit;
    SaturationFit uncertainties;
    double chi2 = 0.0;
    double rms_residual = 0.0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Least-squares fit of I(P) = I_inf * P / (P + P_sat).
inline SaturationFitResult fit_saturation(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw InvalidInput("fit_saturation: need at least 3 points");
    for (const auto& [p, i] : points)
        if (!(p >= 0.0) || !std::isfinite(i))
            throw InvalidInput("fit_saturation: invalid point");

    double imax = 0.0, pmax = 0.0;
    for (const auto& [p, i] : points) {
        imax = std::max(imax, i);
        pmax = std::max(pmax, p);
    }
    if (!(imax > 0.0)) throw InvalidInput("fit_saturation: no positive rates");

    double p_half = pmax / 2.0;
    double best_gap = 1e300;
    for (const auto& [p, i] : points)
        if (std::abs(i - imax / 2.0) < best_gap && p > 0.0) {
            best_gap = std::abs(i - imax / 2.0);
            p_half = p;
        }

    auto residuals = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            r[i] = x[0] * points[i].first / (points[i].first + x[1]) - points[i].second;
        return r;
    };

    fit::LMOptions opt;
    opt.lower = Eigen::Vector2d(1e-12, 1e-12);
    opt.upper = Eigen::Vector2d(1e12, 1e12);
    const auto lm =
        fit::levenberg_marquardt(residuals, Eigen::Vector2d(1.2 * imax, p_half), opt);

    SaturationFitResult out;
    out.fit = {lm.params[1], lm.params[0]};
    out.chi2 = lm.chi2;
    out.rms_residual = std::sqrt(lm.chi2 / static_cast<double>(points.size()));
    out.converged = lm.converged;
    const auto dof = std::max<std::size_t>(1, points.size() - 2);
    const double scale = lm.chi2 / static_cast<double>(dof);
    out.uncertainties = {std::sqrt(std::max(0.0, lm.covariance(1, 1) * scale)),
                         std::sqrt(std::max(0.0, lm.covariance(0, 0) * scale))};
    if (!lm.converged) out.warnings.push_back("fit did not converge: " + lm.message);
    if (pmax < 0.3 * out.fit.p_sat_uW || out.uncertainties.i_inf_Mcps > out.fit.i_inf_Mcps)
        out.warnings.push_back("all points in the linear regime: I_inf unidentifiable");
    return out;
}

/// Percent change (reference - other) / reference * 100.
inline double percent_change(double reference, double other) {
    if (reference == 0.0) throw InvalidInput("percent_change: zero reference");
    return 100.0 * (reference - other) / reference;
}

}  // namespace sivspec::dynamics
