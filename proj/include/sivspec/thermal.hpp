#pragma once

// Temperature-dependence models for homogeneous linewidth and line
// shift: weighted linear fits in a monomial basis T^n, model ranking by
// reduced chi^2, and the lattice-contraction shift integral.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sivspec/errors.hpp"
#include "sivspec/units.hpp"

namespace sivspec::thermal {

enum class SeriesKind { linewidth, shift };

struct ThermalSeries {
    std::vector<double> temperatures_K;
    std::vector<double> values;           // widths or positions
    std::vector<double> sigmas;           // optional, same unit as values
    units::Unit unit = units::Unit::GHz;  // GHz or cm^-1
    SeriesKind kind = SeriesKind::linewidth;

    void validate() const {
        if (temperatures_K.size() != values.size())
            throw InvalidInput("ThermalSeries: length mismatch");
        if (!sigmas.empty() && sigmas.size() != values.size())
            throw InvalidInput("ThermalSeries: sigma length mismatch");
        for (std::size_t i = 0; i < temperatures_K.size(); ++i) {
            if (!(temperatures_K[i] > 0.0)) throw InvalidInput("ThermalSeries: T must be > 0");
            if (i > 0 && !(temperatures_K[i] > temperatures_K[i - 1]))
                throw InvalidInput("ThermalSeries: temperatures must be strictly increasing");
        }
        for (double s : sigmas)
            if (!(s > 0.0)) throw InvalidInput("ThermalSeries: sigmas must be positive");
    }
};

struct PowerLawModel {
    std::vector<int> exponents;           // subset of {2,3,4,5,7}
    std::vector<double> coefficients;     // value-unit per K^n, empty until fitted
    std::optional<double> offset;         // constant term (shift reference)
    bool fit_offset = false;

    std::size_t parameter_count() const { return exponents.size() + (fit_offset ? 1 : 0); }

    std::string name() const {
        std::string s;
        for (std::size_t i = 0; i < exponents.size(); ++i) {
            if (i) s += "+";
            s += "T^" + std::to_string(exponents[i]);
        }
        if (fit_offset) s += "+const";
        return s;
    }

    double eval(double temperature_K) const {
        double v = offset.value_or(0.0);
        for (std::size_t i = 0; i < exponents.size(); ++i)
            v += coefficients[i] * std::pow(temperature_K, exponents[i]);
        return v;
    }
};

struct PowerLawFit {
    PowerLawModel model;
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    std::size_t dof = 0;
};

namespace detail {

inline PowerLawFit solve_on_support(const ThermalSeries& series, const PowerLawModel& tmpl,
                                    const std::vector<bool>& active) {
    const auto npts = series.values.size();
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < tmpl.exponents.size(); ++i)
        if (active[i]) cols.push_back(i);
    const std::size_t nfree = cols.size() + (tmpl.fit_offset ? 1 : 0);

    if (nfree == 0) {  // all coefficients pinned at zero
        PowerLawFit fit;
        fit.model = tmpl;
        fit.model.coefficients.assign(tmpl.exponents.size(), 0.0);
        for (std::size_t r = 0; r < npts; ++r) {
            const double w = series.sigmas.empty() ? 1.0 : 1.0 / series.sigmas[r];
            fit.chi2 += w * w * series.values[r] * series.values[r];
        }
        fit.dof = npts > tmpl.parameter_count() ? npts - tmpl.parameter_count() : 0;
        fit.reduced_chi2 = fit.dof > 0 ? fit.chi2 / fit.dof : fit.chi2;
        return fit;
    }

    Eigen::MatrixXd design(npts, nfree);
    Eigen::VectorXd rhs(npts);
    for (std::size_t r = 0; r < npts; ++r) {
        const double w = series.sigmas.empty() ? 1.0 : 1.0 / series.sigmas[r];
        for (std::size_t c = 0; c < cols.size(); ++c)
            design(r, c) = w * std::pow(series.temperatures_K[r], tmpl.exponents[cols[c]]);
        if (tmpl.fit_offset) design(r, cols.size()) = w;
        rhs[r] = w * series.values[r];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < static_cast<Eigen::Index>(nfree))
        throw DegenerateDesign("fit_power_law: rank-deficient design matrix");
    const Eigen::VectorXd sol = qr.solve(rhs);

    PowerLawFit fit;
    fit.model = tmpl;
    fit.model.coefficients.assign(tmpl.exponents.size(), 0.0);
    for (std::size_t c = 0; c < cols.size(); ++c) fit.model.coefficients[cols[c]] = sol[c];
    if (tmpl.fit_offset) fit.model.offset = sol[cols.size()];

    fit.chi2 = (design * sol - rhs).squaredNorm();
    fit.dof = npts > tmpl.parameter_count() ? npts - tmpl.parameter_count() : 0;
    fit.reduced_chi2 = fit.dof > 0 ? fit.chi2 / fit.dof : fit.chi2;
    return fit;
}

}  // namespace detail

/// Weighted linear least squares in the monomial basis of `tmpl`.
/// Linewidth series constrain all power-law coefficients to be
/// non-negative (broadening mechanisms add); the constrained optimum is
/// found exactly by searching supports, which is cheap for <= 3 terms.
inline PowerLawFit fit_power_law(const ThermalSeries& series, const PowerLawModel& tmpl) {
    series.validate();
    if (tmpl.exponents.empty()) throw InvalidInput("fit_power_law: no exponents");
    for (int e : tmpl.exponents)
        if (e != 2 && e != 3 && e != 4 && e != 5 && e != 7)
            throw InvalidInput("fit_power_law: unsupported exponent T^" + std::to_string(e));
    if (series.values.size() < tmpl.parameter_count() + 2)
        throw InvalidInput("fit_power_law: need at least 2 more points than parameters");

    const std::vector<bool> all(tmpl.exponents.size(), true);
    PowerLawFit unconstrained = detail::solve_on_support(series, tmpl, all);

    if (series.kind != SeriesKind::linewidth) return unconstrained;
    const bool feasible = std::all_of(unconstrained.model.coefficients.begin(),
                                      unconstrained.model.coefficients.end(),
                                      [](double c) { return c >= 0.0; });
    if (feasible) return unconstrained;

    // Active-set search over all supports; the constrained optimum lies in
    // the relative interior of one of them.
    std::optional<PowerLawFit> best;
    const std::size_t k = tmpl.exponents.size();
    for (std::size_t mask = 0; mask < (1u << k); ++mask) {
        std::vector<bool> active(k);
        for (std::size_t i = 0; i < k; ++i) active[i] = mask & (1u << i);
        PowerLawFit cand;
        try {
            cand = detail::solve_on_support(series, tmpl, active);
        } catch (const DegenerateDesign&) {
            continue;
        }
        if (!std::all_of(cand.model.coefficients.begin(), cand.model.coefficients.end(),
                         [](double c) { return c >= 0.0; }))
            continue;
        if (!best || cand.chi2 < best->chi2) best = cand;
    }
    if (!best) throw DegenerateDesign("fit_power_law: no feasible non-negative solution");
    return *best;
}

enum class RankMetric { reduced_chi2, raw_chi2 };

struct ModelRanking {
    std::vector<PowerLawFit> ranked;  // best first
    RankMetric metric = RankMetric::reduced_chi2;
};

/// Fit every candidate template and rank by reduced chi^2 (switchable to
/// raw chi^2). Ties within 1% break toward fewer parameters.
inline ModelRanking select_model(const ThermalSeries& series,
                                 const std::vector<PowerLawModel>& candidates,
                                 RankMetric metric = RankMetric::reduced_chi2) {
    if (candidates.size() < 2) throw InvalidInput("select_model: need at least 2 candidates");
    ModelRanking out;
    out.metric = metric;
    for (const auto& tmpl : candidates) out.ranked.push_back(fit_power_law(series, tmpl));

    auto score = [&](const PowerLawFit& f) {
        return metric == RankMetric::reduced_chi2 ? f.reduced_chi2 : f.chi2;
    };
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [&](const PowerLawFit& a, const PowerLawFit& b) { return score(a) < score(b); });

    // Within groups whose scores agree to 1%, prefer fewer parameters.
    for (std::size_t lo = 0; lo < out.ranked.size();) {
        std::size_t hi = lo + 1;
        const double base = score(out.ranked[lo]);
        while (hi < out.ranked.size() && score(out.ranked[hi]) <= base + 0.01 * std::max(base, 1e-300))
            ++hi;
        std::stable_sort(out.ranked.begin() + lo, out.ranked.begin() + hi,
                         [&](const PowerLawFit& a, const PowerLawFit& b) {
                             return a.model.parameter_count() < b.model.parameter_count();
                         });
        lo = hi;
    }
    return out;
}

struct LatticeShiftParams {
    double shift_rate_per_GPa = 0.0;  // ZPL shift rate under hydrostatic compression, cm^-1/GPa
    double c11_GPa = 0.0;             // elastic moduli
    double c12_GPa = 0.0;
    double alpha3_per_K4 = 0.0;       // volume expansion alpha_v(T) = alpha3 T^3
    double t_cut_K = 100.0;           // validity bound of the cubic expansion law

    void validate() const {
        if (!(c11_GPa > 0.0 && c12_GPa > 0.0))
            throw InvalidInput("LatticeShiftParams: elastic moduli must be > 0");
        if (!(t_cut_K > 0.0)) throw InvalidInput("LatticeShiftParams: t_cut must be > 0");
    }
};

/// Lattice-contraction line shift: A (c11 + 2 c12) * integral_0^T alpha_v,
/// with alpha_v = alpha3 T'^3, i.e. exactly quartic in T.
inline double lattice_shift(double temperature_K, const LatticeShiftParams& p) {
    p.validate();
    if (temperature_K < 0.0) throw InvalidInput("lattice_shift: negative temperature");
    if (temperature_K > p.t_cut_K)
        throw ValidityError("lattice_shift: T above the cubic-expansion validity bound");
    const double t4 = temperature_K * temperature_K * temperature_K * temperature_K;
    return p.shift_rate_per_GPa * (p.c11_GPa + 2.0 * p.c12_GPa) * p.alpha3_per_K4 * t4 / 4.0;
}

/// Overall shift across a series: value at max T minus value at min T,
/// reported in cm^-1. With absolute positions in energy units a blue
/// shift upon cooling comes out negative.
inline double total_shift(const ThermalSeries& series) {
    series.validate();
    if (series.kind != SeriesKind::shift) throw InvalidInput("total_shift: series kind must be shift");
    if (series.values.size() < 2) throw InvalidInput("total_shift: need at least 2 temperatures");
    const double delta = series.values.back() - series.values.front();
    if (series.unit == units::Unit::inv_cm) return delta;
    if (series.unit == units::Unit::GHz) return delta / units::kGHzPerInvCm;
    throw InvalidInput("total_shift: series unit must be GHz or cm^-1");
}

}  // namespace sivspec::thermal
