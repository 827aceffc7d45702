#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "sivspec/dynamics.hpp"
#include "sivspec/io.hpp"
#include "sivspec/photonmc.hpp"
#include "sivspec/synth.hpp"

using namespace sivspec;
using photonmc::PhotonStream;
using photonmc::SimConfig;
using Catch::Approx;

namespace {
const dynamics::RateCoefficients kBrightRT = synth::preset_rates("e1-rt");
}

TEST_CASE("simulation is deterministic in its seed") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 73.0;
    cfg.duration_s = 2e-3;
    cfg.detection_efficiency = 0.01;
    cfg.jitter_fwhm_ns = 0.3;
    cfg.background_rate_cps = 5000.0;
    cfg.seed = 42;

    const auto a = photonmc::simulate(cfg);
    const auto b = photonmc::simulate(cfg);
    REQUIRE(a.events.size() == b.events.size());
    CHECK(a.events == b.events);

    cfg.seed = 43;
    const auto c = photonmc::simulate(cfg);
    CHECK(a.events != c.events);
}

TEST_CASE("zero detection efficiency and zero background yield an empty stream") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 73.0;
    cfg.duration_s = 1e-3;
    cfg.detection_efficiency = 0.0;
    cfg.seed = 7;
    CHECK(photonmc::simulate(cfg).events.empty());
}

TEST_CASE("memory cap refuses oversized runs with an estimate") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 300.0;
    cfg.duration_s = 3600.0;
    cfg.detection_efficiency = 1.0;
    cfg.seed = 3;
    cfg.max_events = 1000;
    CHECK_THROWS_AS(photonmc::simulate(cfg), CapacityError);
}

TEST_CASE("two-level detected rate matches the analytic steady state") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.rates.k23_MHz = 0.0;
    cfg.rates.d_MHz = 0.0;
    cfg.rates.k31_0_MHz = 0.0;
    cfg.power_uW = 200.0;
    cfg.duration_s = 0.01;
    cfg.detection_efficiency = 0.02;
    cfg.seed = 11;

    const auto stream = photonmc::simulate(cfg);
    const double expected_cps =
        cfg.detection_efficiency * dynamics::emission_rate_MHz(cfg.rates, cfg.power_uW) * 1e6;
    const double got_cps = static_cast<double>(stream.events.size()) / cfg.duration_s;
    CHECK(got_cps == Approx(expected_cps).epsilon(0.02));
}

TEST_CASE("three-level occupation matches the rate-equation steady state") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 73.0;
    cfg.duration_s = 0.05;
    cfg.detection_efficiency = 0.003;
    cfg.seed = 13;

    const auto stream = photonmc::simulate(cfg);
    const double rate_cps = static_cast<double>(stream.events.size()) / cfg.duration_s;
    const double rho2_mc = rate_cps / (cfg.detection_efficiency * cfg.rates.k21_MHz * 1e6);
    const double rho2 = dynamics::steady_state(cfg.rates, cfg.power_uW)[1];
    CHECK(rho2_mc == Approx(rho2).epsilon(0.01));

    // and the raw count sits within 3 sigma of the Poisson expectation
    const double mean = cfg.detection_efficiency * cfg.rates.k21_MHz * 1e6 * rho2 *
                        cfg.duration_s;
    CHECK(std::abs(static_cast<double>(stream.events.size()) - mean) < 3.0 * std::sqrt(mean));
}

TEST_CASE("stream statistics") {
    SECTION("hand-built stream: 100 events across one second") {
        PhotonStream s;
        for (int i = 0; i < 100; ++i)
            s.events.push_back({static_cast<std::int64_t>(i * (1'000'000'000'000ll / 99)), 0});
        s.events.back().t_ps = 1'000'000'000'000ll;
        const auto st = photonmc::stream_stats(s);
        CHECK(st.span_s == Approx(1.0).epsilon(1e-9));
        CHECK(st.rate_ch0_cps == Approx(100.0).epsilon(1e-6));
        CHECK(st.counts_ch1 == 0);
    }

    SECTION("the beamsplitter is balanced") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 73.0;
        cfg.duration_s = 0.02;
        cfg.detection_efficiency = 0.005;
        cfg.seed = 17;
        const auto st = photonmc::stream_stats(photonmc::simulate(cfg));
        const double n = static_cast<double>(st.total);
        CHECK(std::abs(static_cast<double>(st.counts_ch0) - n / 2) < 3.0 * std::sqrt(n / 4));
    }

    SECTION("background-only run recovers the configured rate") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 0.0;
        cfg.duration_s = 2.0;
        cfg.detection_efficiency = 0.0;
        cfg.background_rate_cps = 50'000.0;
        cfg.seed = 19;
        const auto stream = photonmc::simulate(cfg);
        const double mean = cfg.background_rate_cps * cfg.duration_s;
        CHECK(std::abs(static_cast<double>(stream.events.size()) - mean) <
              3.0 * std::sqrt(mean));
    }

    SECTION("empty stream is an error") {
        CHECK_THROWS_AS(photonmc::stream_stats(PhotonStream{}), InvalidInput);
    }
}

TEST_CASE("correlation histogram") {
    SECTION("a single pair lands in the bin containing its delay") {
        PhotonStream s;
        s.events.push_back({1'000'000, 0});
        s.events.push_back({1'003'700, 1});  // +3.7 ns
        const auto h = photonmc::correlate(s, 1.0, 10.0, photonmc::Normalization::raw);
        std::uint64_t total = 0;
        std::size_t hit_bin = 0;
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            total += h.counts[i];
            if (h.counts[i] > 0) hit_bin = i;
        }
        CHECK(total == 1);
        CHECK(h.bin_edges_ns[hit_bin] <= 3.7);
        CHECK(h.bin_edges_ns[hit_bin + 1] >= 3.7);
    }

    SECTION("uncorrelated light is flat at one") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 0.0;
        cfg.duration_s = 1.0;
        cfg.detection_efficiency = 0.0;
        cfg.background_rate_cps = 200'000.0;
        cfg.seed = 23;
        const auto h =
            photonmc::correlate(photonmc::simulate(cfg), 2.0, 400.0);
        const auto st = photonmc::stream_stats(photonmc::simulate(cfg));
        const double expected = st.rate_ch0_cps * st.rate_ch1_cps * st.span_s * 2e-9;
        double chi2 = 0.0;
        for (double v : h.normalized) chi2 += (v - 1.0) * (v - 1.0) * expected;
        const double nbins = static_cast<double>(h.normalized.size());
        CHECK(chi2 / nbins < 1.3);  // per-bin Poisson consistency
        double mean = 0.0;
        for (double v : h.normalized) mean += v;
        CHECK(mean / nbins == Approx(1.0).margin(3.0 / std::sqrt(expected * nbins)));
    }

    SECTION("antibunching shows up at zero delay") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 300.0;
        cfg.duration_s = 0.02;
        cfg.detection_efficiency = 0.2;
        cfg.seed = 29;
        const auto stream = photonmc::simulate(cfg);
        const auto g = dynamics::g2_from_rates(cfg.rates, cfg.power_uW);
        const auto h = photonmc::correlate(stream, g.tau1_ns / 5.0, 60.0);
        std::uint64_t total = 0;
        for (auto c : h.counts) total += c;
        REQUIRE(total >= 100'000);
        const std::size_t mid = h.counts.size() / 2;
        CHECK(h.normalized[mid] < 0.1);
    }

    SECTION("background dilutes the dip by the squared signal fraction") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 300.0;
        cfg.duration_s = 0.02;
        cfg.detection_efficiency = 0.05;
        cfg.seed = 31;
        const double signal_cps =
            cfg.detection_efficiency * dynamics::emission_rate_MHz(cfg.rates, cfg.power_uW) * 1e6;
        const double rho = 0.75;
        cfg.background_rate_cps = signal_cps * (1.0 - rho) / rho;

        const auto stream = photonmc::simulate(cfg);
        const auto g = dynamics::g2_from_rates(cfg.rates, cfg.power_uW);
        const auto h = photonmc::correlate(stream, g.tau1_ns / 3.0, 60.0);
        const std::size_t mid = h.counts.size() / 2;
        // residual correlation at zero delay: 1 - rho^2 plus the finite-bin ramp
        const double lift =
            (dynamics::g2_eval(g, h.bin_center_ns(mid) / 4.0) + 2.0 * dynamics::g2_eval(g, 0.0)) /
            3.0;
        const double expected = 1.0 - rho * rho * (1.0 - lift);
        const auto st = photonmc::stream_stats(stream);
        const double per_bin =
            st.rate_ch0_cps * st.rate_ch1_cps * st.span_s * (g.tau1_ns / 3.0) * 1e-9;
        const double sigma = std::sqrt(expected / per_bin);
        CHECK(std::abs(h.normalized[mid] - expected) < 3.5 * sigma);
    }

    SECTION("dead time enforces a per-channel gap") {
        SimConfig cfg;
        cfg.rates = kBrightRT;
        cfg.power_uW = 300.0;
        cfg.duration_s = 1e-3;
        cfg.detection_efficiency = 0.05;
        cfg.dead_time_ns = 50.0;
        cfg.seed = 37;
        const auto stream = photonmc::simulate(cfg);
        std::array<std::int64_t, 2> last{-1, -1};
        for (const auto& ev : stream.events) {
            if (last[ev.channel] >= 0) CHECK(ev.t_ps - last[ev.channel] >= 50'000);
            last[ev.channel] = ev.t_ps;
        }
    }
}

TEST_CASE("round trip from simulation through correlation to a parameter fit") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 73.0;
    cfg.duration_s = 0.12;
    cfg.detection_efficiency = 0.04;
    cfg.seed = 41;

    const auto stream = photonmc::simulate(cfg);
    const auto truth = dynamics::g2_from_rates(cfg.rates, cfg.power_uW);
    const auto h = photonmc::correlate(stream, 0.12, 6.0 * truth.tau2_ns);
    std::uint64_t total = 0;
    for (auto c : h.counts) total += c;
    REQUIRE(total >= 200'000);

    const auto curve = photonmc::to_g2_curve(h);
    const auto fit = dynamics::fit_g2(curve, {0.0, 1.0},
                                      {0.8 * truth.a, 1.3 * truth.tau1_ns, 0.7 * truth.tau2_ns});
    CHECK(fit.converged);
    CHECK(fit.params.a == Approx(truth.a).epsilon(0.10));
    CHECK(fit.params.tau1_ns == Approx(truth.tau1_ns).epsilon(0.10));
    CHECK(fit.params.tau2_ns == Approx(truth.tau2_ns).epsilon(0.15));
}

TEST_CASE("photon stream files round-trip bit-exactly") {
    SimConfig cfg;
    cfg.rates = kBrightRT;
    cfg.power_uW = 73.0;
    cfg.duration_s = 1e-3;
    cfg.detection_efficiency = 0.01;
    cfg.jitter_fwhm_ns = 0.4;
    cfg.seed = 43;
    const auto stream = photonmc::simulate(cfg);
    REQUIRE(!stream.events.empty());

    const auto dir = std::filesystem::temp_directory_path() / "sivspec_test_io";
    std::filesystem::create_directories(dir);

    const auto bin_path = dir / "stream.bin";
    io::write_stream_binary(bin_path, stream);
    const auto back_bin = io::read_stream_binary(bin_path);
    CHECK(back_bin.events == stream.events);

    const auto csv_path = dir / "stream.csv";
    io::write_stream_csv(csv_path, stream);
    const auto back_csv = io::read_stream_csv(csv_path);
    CHECK(back_csv.events == stream.events);

    std::filesystem::remove_all(dir);
}
