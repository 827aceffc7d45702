#include <catch_amalgamated.hpp>

#include <cmath>

#include "sivspec/synth.hpp"
#include "sivspec/thermal.hpp"

using namespace sivspec;
using thermal::PowerLawModel;
using thermal::SeriesKind;
using thermal::ThermalSeries;
using Catch::Approx;

namespace {

ThermalSeries exact_series(const PowerLawModel& model, SeriesKind kind = SeriesKind::linewidth) {
    return synth::make_thermal_series(model, {5, 15, 30, 50, 80, 120, 170, 230, 295}, 0.0, 1,
                                      kind);
}

}  // namespace

TEST_CASE("power-law fits") {
    SECTION("exact cubic data recovers the coefficient with zero chi2") {
        PowerLawModel truth{{3}, {1.1e-5}};
        const auto fit = thermal::fit_power_law(exact_series(truth), PowerLawModel{{3}});
        CHECK(fit.model.coefficients[0] == Approx(1.1e-5).epsilon(1e-12));
        CHECK(fit.chi2 < 1e-18);
    }

    SECTION("quadratic-plus-quartic template recovers both terms") {
        PowerLawModel truth{{2, 4}, {3.0e-4, 2.0e-8}};
        const auto fit = thermal::fit_power_law(exact_series(truth, SeriesKind::shift),
                                                PowerLawModel{{2, 4}});
        CHECK(fit.model.coefficients[0] == Approx(3.0e-4).epsilon(1e-10));
        CHECK(fit.model.coefficients[1] == Approx(2.0e-8).epsilon(1e-10));
    }

    SECTION("noisy cubic data lands within 10 percent for most seeds") {
        PowerLawModel truth{{3}, {1.1e-5}};
        int good = 0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            const auto series = synth::make_thermal_series(
                truth, {5, 20, 45, 75, 110, 150, 190, 230, 265, 300}, 0.05, 100 + s,
                SeriesKind::linewidth);
            const auto fit = thermal::fit_power_law(series, PowerLawModel{{3}});
            if (std::abs(fit.model.coefficients[0] - 1.1e-5) < 0.10 * 1.1e-5) ++good;
        }
        CHECK(good >= 95);
    }

    SECTION("linewidth coefficients are projected to be non-negative") {
        // Pure T^5 data forced through a {3,5} template: the cubic term
        // would go slightly negative unconstrained on noisy data.
        PowerLawModel truth{{5}, {4.0e-10}};
        const auto series = synth::make_thermal_series(
            truth, {5, 20, 45, 75, 110, 150, 190, 230, 265, 300}, 0.08, 7, SeriesKind::linewidth);
        const auto fit = thermal::fit_power_law(series, PowerLawModel{{3, 5}});
        CHECK(fit.model.coefficients[0] >= 0.0);
        CHECK(fit.model.coefficients[1] >= 0.0);
    }

    SECTION("scaling the values scales the coefficients") {
        PowerLawModel truth{{3, 5}, {1.0e-5, 3.0e-10}};
        auto series = exact_series(truth);
        const auto base = thermal::fit_power_law(series, PowerLawModel{{3, 5}});
        for (auto& v : series.values) v *= 7.5;
        const auto scaled = thermal::fit_power_law(series, PowerLawModel{{3, 5}});
        CHECK(scaled.model.coefficients[0] == Approx(7.5 * base.model.coefficients[0]).epsilon(1e-12));
        CHECK(scaled.model.coefficients[1] == Approx(7.5 * base.model.coefficients[1]).epsilon(1e-12));
    }

    SECTION("degenerate preconditions throw") {
        PowerLawModel truth{{3}, {1e-5}};
        ThermalSeries tiny;
        tiny.temperatures_K = {10, 20};
        tiny.values = {1.0, 2.0};
        CHECK_THROWS_AS(thermal::fit_power_law(tiny, PowerLawModel{{3, 5}}), InvalidInput);
    }
}

TEST_CASE("model selection") {
    const std::vector<PowerLawModel> candidates{PowerLawModel{{3}}, PowerLawModel{{5}},
                                                PowerLawModel{{7}}};

    SECTION("cubic generator wins on noisy data") {
        PowerLawModel truth{{3}, {1.1e-5}};
        int wins = 0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            const auto series = synth::make_thermal_series(
                truth, {5, 20, 45, 75, 110, 150, 190, 230, 265, 300}, 0.06, 500 + s,
                SeriesKind::linewidth);
            const auto ranking = thermal::select_model(series, candidates);
            if (ranking.ranked.front().model.exponents == std::vector<int>{3}) ++wins;
        }
        CHECK(wins >= 95);
    }

    SECTION("quintic generator wins on noisy data") {
        PowerLawModel truth{{5}, {4.0e-10}};
        int wins = 0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            const auto series = synth::make_thermal_series(
                truth, {5, 20, 45, 75, 110, 150, 190, 230, 265, 300}, 0.06, 900 + s,
                SeriesKind::linewidth);
            const auto ranking = thermal::select_model(series, candidates);
            if (ranking.ranked.front().model.exponents == std::vector<int>{5}) ++wins;
        }
        CHECK(wins >= 95);
    }

    SECTION("noiseless data ranks its generator first with zero chi2") {
        PowerLawModel truth{{5}, {4.0e-10}};
        const auto ranking = thermal::select_model(exact_series(truth), candidates);
        CHECK(ranking.ranked.front().model.exponents == std::vector<int>{5});
        CHECK(ranking.ranked.front().chi2 < 1e-20);
    }

    SECTION("ties break toward fewer parameters") {
        PowerLawModel truth{{3}, {1.1e-5}};
        const auto ranking = thermal::select_model(
            exact_series(truth), {PowerLawModel{{3, 5}}, PowerLawModel{{3}}});
        CHECK(ranking.ranked.front().model.exponents == std::vector<int>{3});
    }

    SECTION("ranking is invariant under uniform scaling") {
        PowerLawModel truth{{3}, {1.1e-5}};
        auto series = synth::make_thermal_series(
            truth, {5, 20, 45, 75, 110, 150, 190, 230, 265, 300}, 0.06, 321,
            SeriesKind::linewidth);
        const auto base = thermal::select_model(series, candidates);
        for (auto& v : series.values) v *= 40.0;
        for (auto& s : series.sigmas) s *= 40.0;
        const auto scaled = thermal::select_model(series, candidates);
        for (std::size_t i = 0; i < base.ranked.size(); ++i)
            CHECK(base.ranked[i].model.exponents == scaled.ranked[i].model.exponents);
    }
}

TEST_CASE("lattice-contraction shift") {
    thermal::LatticeShiftParams p;
    p.shift_rate_per_GPa = 0.7;
    p.c11_GPa = 3.0;
    p.c12_GPa = 2.0;
    p.alpha3_per_K4 = 0.5;
    p.t_cut_K = 100.0;

    CHECK(thermal::lattice_shift(0.0, p) == 0.0);
    CHECK(thermal::lattice_shift(40.0, p) == Approx(16.0 * thermal::lattice_shift(20.0, p)));
    // hand integral of alpha3 T'^3 up to T = 2: alpha3 * 2^4/4 = 4 alpha3
    CHECK(thermal::lattice_shift(2.0, p) ==
          Approx(p.shift_rate_per_GPa * (p.c11_GPa + 2 * p.c12_GPa) * p.alpha3_per_K4 * 4.0)
              .epsilon(1e-14));
    CHECK_THROWS_AS(thermal::lattice_shift(101.0, p), ValidityError);
}

TEST_CASE("total shift across a series") {
    SECTION("constant series shifts by zero") {
        ThermalSeries s;
        s.kind = SeriesKind::shift;
        s.unit = units::Unit::inv_cm;
        s.temperatures_K = {5, 100, 295};
        s.values = {13550.0, 13550.0, 13550.0};
        CHECK(thermal::total_shift(s) == 0.0);
    }

    SECTION("a 1 nm blue shift upon cooling at 738 nm reads about -18.4 cm^-1") {
        // positions: 737 nm when cold, 738 nm at room temperature
        ThermalSeries s;
        s.kind = SeriesKind::shift;
        s.unit = units::Unit::inv_cm;
        s.temperatures_K = {5, 150, 295};
        for (double lam : {737.0, 737.5, 738.0})
            s.values.push_back(units::convert_absolute(lam, units::Unit::nm, units::Unit::inv_cm));
        CHECK(thermal::total_shift(s) == Approx(-18.4).epsilon(0.01));
    }

    SECTION("linear ramp") {
        ThermalSeries s;
        s.kind = SeriesKind::shift;
        s.unit = units::Unit::inv_cm;
        s.temperatures_K = {10, 150, 290};
        s.values = {100.0, 105.0, 110.0};
        CHECK(thermal::total_shift(s) == Approx(10.0).epsilon(1e-12));
    }
}
