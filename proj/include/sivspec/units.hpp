#pragma once

// Spectral unit conversions. Absolute positions convert through exact
// reciprocal relations (nu = c / lambda and friends). Widths and shifts
// (quantities carrying a reference wavelength) convert through the
// first-order dispersion |dnu| = c |dlambda| / lambda^2, sign-preserving.
// Canonical internal units elsewhere in the toolkit: GHz for widths,
// shifts and splittings, nm for absolute positions.

#include <cmath>
#include <optional>
#include <string>

#include "sivspec/errors.hpp"

namespace sivspec::units {

enum class Unit { nm, GHz, inv_cm, meV };

inline constexpr double kCNmGHz = 2.99792458e8;       // c in nm * GHz
inline constexpr double kHcMeVNm = 1239841.9843;      // h*c in meV * nm
inline constexpr double kGHzPerInvCm = 29.9792458;    // c in cm * GHz
inline constexpr double kMeVPerInvCm = kHcMeVNm * 1e-7;

enum class QuantityKind { absolute, delta };

struct SpectralQuantity {
    double value = 0.0;
    Unit unit = Unit::nm;
    QuantityKind kind = QuantityKind::absolute;
    // Required for widths/shifts crossing the wavelength <->
    // frequency/energy boundary.
    std::optional<double> reference_wavelength_nm{};
};

inline std::string unit_name(Unit u) {
    switch (u) {
        case Unit::nm: return "nm";
        case Unit::GHz: return "GHz";
        case Unit::inv_cm: return "cm-1";
        case Unit::meV: return "meV";
    }
    return "?";
}

inline Unit parse_unit(const std::string& s) {
    if (s == "nm") return Unit::nm;
    if (s == "GHz" || s == "ghz") return Unit::GHz;
    if (s == "cm-1" || s == "cm^-1" || s == "1/cm" || s == "inv-cm") return Unit::inv_cm;
    if (s == "meV" || s == "mev") return Unit::meV;
    throw InvalidInput("unknown spectral unit: " + s);
}

namespace detail {

// Absolute positions: GHz, cm^-1 and meV are linearly related; nm is the
// reciprocal leg. Route everything through GHz.
inline double absolute_to_ghz(double value, Unit unit) {
    switch (unit) {
        case Unit::nm:
            if (!(value > 0.0)) throw InvalidInput("convert: absolute wavelength must be > 0");
            return kCNmGHz / value;
        case Unit::GHz: return value;
        case Unit::inv_cm: return value * kGHzPerInvCm;
        case Unit::meV: return value * (kGHzPerInvCm / kMeVPerInvCm);
    }
    throw InvalidInput("unreachable unit");
}

inline double absolute_from_ghz(double ghz, Unit unit) {
    switch (unit) {
        case Unit::nm:
            if (!(ghz > 0.0)) throw InvalidInput("convert: absolute 0 has no wavelength equivalent");
            return kCNmGHz / ghz;
        case Unit::GHz: return ghz;
        case Unit::inv_cm: return ghz / kGHzPerInvCm;
        case Unit::meV: return ghz / (kGHzPerInvCm / kMeVPerInvCm);
    }
    throw InvalidInput("unreachable unit");
}

// Width/shift: anything -> GHz about the reference wavelength.
inline double delta_to_ghz(double value, Unit unit, double ref_nm) {
    switch (unit) {
        case Unit::nm: return value * kCNmGHz / (ref_nm * ref_nm);
        case Unit::GHz: return value;
        case Unit::inv_cm: return value * kGHzPerInvCm;
        case Unit::meV: return value * kGHzPerInvCm / kMeVPerInvCm;
    }
    throw InvalidInput("unreachable unit");
}

inline double delta_from_ghz(double ghz, Unit unit, double ref_nm) {
    switch (unit) {
        case Unit::nm: return ghz * (ref_nm * ref_nm) / kCNmGHz;
        case Unit::GHz: return ghz;
        case Unit::inv_cm: return ghz / kGHzPerInvCm;
        case Unit::meV: return ghz * kMeVPerInvCm / kGHzPerInvCm;
    }
    throw InvalidInput("unreachable unit");
}

}  // namespace detail

inline SpectralQuantity convert(const SpectralQuantity& q, Unit target) {
    if (!std::isfinite(q.value)) throw InvalidInput("convert: non-finite value");
    if (q.unit == target) return {q.value, target, q.kind, q.reference_wavelength_nm};

    const bool crosses_nm = (q.unit == Unit::nm) != (target == Unit::nm);
    if (q.kind == QuantityKind::delta) {
        if (crosses_nm && !q.reference_wavelength_nm.has_value())
            throw InvalidInput("convert: width/shift conversion to/from nm needs a reference "
                               "wavelength");
        const double ref = q.reference_wavelength_nm.value_or(1.0);
        if (!(ref > 0.0)) throw InvalidInput("convert: reference wavelength must be > 0");
        const double ghz = detail::delta_to_ghz(q.value, q.unit, ref);
        return {detail::delta_from_ghz(ghz, target, ref), target, q.kind,
                q.reference_wavelength_nm};
    }

    return {detail::absolute_from_ghz(detail::absolute_to_ghz(q.value, q.unit), target), target,
            q.kind, std::nullopt};
}

/// Width/shift conversion helper: value in `from` -> `to` at reference
/// wavelength `ref_nm`.
inline double convert_delta(double value, Unit from, Unit to,
                            std::optional<double> ref_nm = std::nullopt) {
    return convert({value, from, QuantityKind::delta, ref_nm}, to).value;
}

/// Absolute position conversion helper.
inline double convert_absolute(double value, Unit from, Unit to) {
    return convert({value, from, QuantityKind::absolute, std::nullopt}, to).value;
}

}  // namespace sivspec::units
