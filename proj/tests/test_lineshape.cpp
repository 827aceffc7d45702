#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sivspec/lineshape.hpp"
#include "sivspec/rng.hpp"

using namespace sivspec;
using lineshape::InstrumentProfile;
using lineshape::VoigtPeak;
using Catch::Approx;

TEST_CASE("gaussian limit hits half maximum at half the FWHM") {
    const VoigtPeak peak{1.0, 738.0, 0.1, 0.0};
    const double top = lineshape::voigt_eval(peak, 738.0);
    CHECK(lineshape::voigt_eval(peak, 738.05) == Approx(top / 2).epsilon(1e-10));
    CHECK(lineshape::voigt_eval(peak, 737.95) == Approx(top / 2).epsilon(1e-10));
}

TEST_CASE("voigt profile is symmetric about its center") {
    rng::SplitMix64 gen(11);
    for (int i = 0; i < 50; ++i) {
        const VoigtPeak peak{0.1 + gen.uniform01(), 700.0 + 80.0 * gen.uniform01(),
                             0.01 + 0.3 * gen.uniform01(), 0.01 + 0.3 * gen.uniform01()};
        const double delta = 2.0 * gen.uniform01();
        CHECK(lineshape::voigt_eval(peak, peak.center_nm + delta) ==
              Approx(lineshape::voigt_eval(peak, peak.center_nm - delta)).epsilon(1e-12));
    }
}

TEST_CASE("voigt evaluation matches direct quadrature of the convolution integral") {
    const VoigtPeak peak{1.0, 738.0, 0.1, 0.1};
    const double got = lineshape::voigt_eval(peak, 738.05);
    const double want = oracles::voigt_by_quadrature(1.0, 738.0, 0.1, 0.1, 738.05);
    CHECK(got == Approx(want).epsilon(1e-6));

    rng::SplitMix64 gen(17);
    for (int i = 0; i < 10; ++i) {
        const double wg = 0.02 * std::pow(10.0, gen.uniform01());
        const double wl = 0.02 * std::pow(10.0, gen.uniform01());
        const VoigtPeak p{0.5 + gen.uniform01(), 738.0, wg, wl};
        const double fwhm = lineshape::voigt_fwhm(wg, wl);
        for (double frac : {-2.5, -0.7, 0.0, 0.4, 1.8, 3.0}) {
            const double lam = p.center_nm + frac * fwhm;
            CHECK(lineshape::voigt_eval(p, lam) ==
                  Approx(oracles::voigt_by_quadrature(p.area, p.center_nm, wg, wl, lam))
                      .epsilon(1e-6));
        }
    }
}

TEST_CASE("voigt profile integrates to its area") {
    rng::SplitMix64 gen(23);
    for (int i = 0; i < 5; ++i) {
        const VoigtPeak p{0.5 + gen.uniform01(), 738.0, 0.03 + 0.1 * gen.uniform01(),
                          0.03 + 0.1 * gen.uniform01()};
        const double fwhm = lineshape::voigt_fwhm(p.gaussian_fwhm_nm, p.lorentzian_fwhm_nm);
        const double integral = oracles::integrate(
            [&](double lam) { return lineshape::voigt_eval(p, lam); }, p.center_nm - 400 * fwhm,
            p.center_nm + 400 * fwhm, 1e-10);
        CHECK(integral == Approx(p.area).epsilon(1e-3));
    }
}

TEST_CASE("pure limits match closed forms below the width-ratio cutoff") {
    const double wg = 0.1;
    const VoigtPeak nearly_gauss{1.0, 738.0, wg, wg * 1e-6};
    const VoigtPeak nearly_lorentz{1.0, 738.0, 0.1 * 1e-6, 0.1};
    for (double frac : {0.0, 0.3, 1.0, 2.0}) {
        const double lam = 738.0 + frac * wg;
        CHECK(lineshape::voigt_eval(nearly_gauss, lam) ==
              Approx(lineshape::gaussian_profile(1.0, wg, lam - 738.0)).epsilon(1e-9));
        CHECK(lineshape::voigt_eval(nearly_lorentz, lam) ==
              Approx(lineshape::lorentzian_profile(1.0, 0.1, lam - 738.0)).epsilon(1e-9));
    }
}

TEST_CASE("voigt_eval rejects bad input") {
    const VoigtPeak peak{1.0, 738.0, 0.1, 0.1};
    CHECK_THROWS_AS(lineshape::voigt_eval(peak, std::nan("")), InvalidInput);
    CHECK_THROWS_AS(lineshape::voigt_eval(VoigtPeak{1.0, 738.0, 0.0, 0.0}, 738.0),
                    DegenerateProfile);
    CHECK_THROWS_AS(lineshape::voigt_eval(VoigtPeak{-1.0, 738.0, 0.1, 0.0}, 738.0), InvalidInput);
}

TEST_CASE("voigt_fwhm exact limits and oracle agreement") {
    CHECK(lineshape::voigt_fwhm(0.2, 0.0) == 0.2);
    CHECK(lineshape::voigt_fwhm(0.0, 0.3) == 0.3);
    CHECK_THROWS_AS(lineshape::voigt_fwhm(0.0, 0.0), DegenerateProfile);

    auto fwhm_by_bisection = [](double wg, double wl) {
        const VoigtPeak p{1.0, 738.0, wg, wl};
        const double half = lineshape::voigt_eval(p, 738.0) / 2.0;
        const double hi = wg + wl;
        const double root = oracles::bisect(
            [&](double d) { return lineshape::voigt_eval(p, 738.0 + d) - half; }, 0.0, 2.0 * hi,
            1e-14);
        return 2.0 * root;
    };

    CHECK(lineshape::voigt_fwhm(0.1, 0.1) ==
          Approx(fwhm_by_bisection(0.1, 0.1)).epsilon(2e-4));

    rng::SplitMix64 gen(31);
    for (int i = 0; i < 10; ++i) {
        const double wg = 0.02 + 0.3 * gen.uniform01();
        const double wl = 0.02 + 0.3 * gen.uniform01();
        CHECK(lineshape::voigt_fwhm(wg, wl) == Approx(fwhm_by_bisection(wg, wl)).epsilon(2e-4));
    }
}

TEST_CASE("voigt_fwhm is monotone in both widths") {
    rng::SplitMix64 gen(37);
    for (int i = 0; i < 40; ++i) {
        const double wg = 0.01 + 0.5 * gen.uniform01();
        const double wl = 0.01 + 0.5 * gen.uniform01();
        const double base = lineshape::voigt_fwhm(wg, wl);
        CHECK(lineshape::voigt_fwhm(wg * 1.1, wl) > base);
        CHECK(lineshape::voigt_fwhm(wg, wl * 1.1) > base);
    }
}

TEST_CASE("instrument convolution composes widths") {
    const VoigtPeak p{2.0, 737.2, 0.06, 0.02};

    SECTION("ideal instrument leaves the peak unchanged") {
        const auto out = lineshape::convolve_instrument(p, InstrumentProfile{0.0, 0.0});
        CHECK(out.gaussian_fwhm_nm == p.gaussian_fwhm_nm);
        CHECK(out.lorentzian_fwhm_nm == p.lorentzian_fwhm_nm);
        CHECK(out.area == p.area);
        CHECK(out.center_nm == p.center_nm);
    }

    SECTION("gaussian widths add in quadrature") {
        const auto out = lineshape::convolve_instrument(VoigtPeak{1.0, 738.0, 0.03, 0.0},
                                                        InstrumentProfile{0.04, 0.0});
        CHECK(out.gaussian_fwhm_nm == Approx(0.05).epsilon(1e-14));
    }

    SECTION("lorentzian widths add linearly") {
        const auto out = lineshape::convolve_instrument(VoigtPeak{1.0, 738.0, 0.03, 0.01},
                                                        InstrumentProfile{0.04, 0.02});
        CHECK(out.gaussian_fwhm_nm == Approx(0.05).epsilon(1e-14));
        CHECK(out.lorentzian_fwhm_nm == Approx(0.03).epsilon(1e-14));
    }
}

TEST_CASE("deconvolution inverts convolution") {
    SECTION("plain width arithmetic") {
        const auto g = lineshape::deconvolve_instrument(VoigtPeak{1.0, 738.0, 0.05, 0.0},
                                                        InstrumentProfile{0.04, 0.0});
        CHECK(g.peak.gaussian_fwhm_nm == Approx(0.03).epsilon(1e-12));
        CHECK_FALSE(g.resolution_limited());

        const auto l = lineshape::deconvolve_instrument(VoigtPeak{1.0, 738.0, 0.05, 0.03},
                                                        InstrumentProfile{0.0, 0.02});
        CHECK(l.peak.lorentzian_fwhm_nm == Approx(0.01).epsilon(1e-12));
    }

    SECTION("slightly-below-instrument width clamps with a flag") {
        const auto r = lineshape::deconvolve_instrument(VoigtPeak{1.0, 738.0, 0.039, 0.01},
                                                        InstrumentProfile{0.04, 0.0});
        CHECK(r.peak.gaussian_fwhm_nm == 0.0);
        CHECK(r.gaussian_resolution_limited);
    }

    SECTION("a large deficit throws with the deficit attached") {
        try {
            lineshape::deconvolve_instrument(VoigtPeak{1.0, 738.0, 0.02, 0.01},
                                             InstrumentProfile{0.04, 0.0});
            FAIL("expected BelowResolution");
        } catch (const BelowResolution& e) {
            CHECK(e.deficit_nm == Approx(0.02).epsilon(1e-12));
        }
    }

    SECTION("round trip is the identity") {
        rng::SplitMix64 gen(41);
        for (int i = 0; i < 30; ++i) {
            const VoigtPeak p{0.5 + gen.uniform01(), 738.0, 0.02 + 0.2 * gen.uniform01(),
                              0.02 + 0.2 * gen.uniform01()};
            const InstrumentProfile irf{0.05 * gen.uniform01(), 0.05 * gen.uniform01()};
            const auto round = lineshape::deconvolve_instrument(
                lineshape::convolve_instrument(p, irf), irf);
            CHECK(round.peak.gaussian_fwhm_nm == Approx(p.gaussian_fwhm_nm).margin(1e-12));
            CHECK(round.peak.lorentzian_fwhm_nm == Approx(p.lorentzian_fwhm_nm).margin(1e-12));
            const auto back = lineshape::convolve_instrument(round.peak, irf);
            const auto measured = lineshape::convolve_instrument(p, irf);
            CHECK(back.gaussian_fwhm_nm == Approx(measured.gaussian_fwhm_nm).margin(1e-12));
            CHECK(back.lorentzian_fwhm_nm == Approx(measured.lorentzian_fwhm_nm).margin(1e-12));
        }
    }
}
