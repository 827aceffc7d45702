#pragma once

// Kinetic Monte Carlo of the three-level emitter: exact Gillespie event
// stepping over states {1,2,3} with competing exponential clocks, a
// detection chain (efficiency, 50/50 beamsplitter, Gaussian timing
// jitter, per-channel dead time, Poisson background) and coincidence
// correlation. Serves as the brute-force oracle for the rate-equation
// model in dynamics.hpp.
//
// Timestamps live on a 1 ps integer grid; jitter is applied before
// quantization. A run is fully determined by its SimConfig, seed
// included.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sivspec/dynamics.hpp"
#include "sivspec/errors.hpp"
#include "sivspec/rng.hpp"

namespace sivspec::photonmc {

struct SimConfig {
    dynamics::RateCoefficients rates;
    double power_uW = 0.0;
    double duration_s = 1.0;
    double detection_efficiency = 1.0;
    double background_rate_cps = 0.0;
    double jitter_fwhm_ns = 0.0;
    double dead_time_ns = 0.0;
    std::uint64_t seed = 1;
    std::size_t max_events = 50'000'000;

    void validate() const {
        rates.validate();
        if (!(power_uW >= 0.0)) throw InvalidInput("SimConfig: power must be >= 0");
        if (!(duration_s > 0.0)) throw InvalidInput("SimConfig: duration must be > 0");
        if (!(detection_efficiency >= 0.0 && detection_efficiency <= 1.0))
            throw InvalidInput("SimConfig: detection efficiency must be in [0,1]");
        if (!(background_rate_cps >= 0.0) || !(jitter_fwhm_ns >= 0.0) || !(dead_time_ns >= 0.0))
            throw InvalidInput("SimConfig: negative rate/jitter/dead time");
        if (seed == 0)
            throw InvalidInput("SimConfig: seed 0 is reserved for entropy seeding; resolve it first");
    }
};

struct PhotonEvent {
    std::int64_t t_ps = 0;
    std::uint8_t channel = 0;

    friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

struct PhotonStream {
    std::vector<PhotonEvent> events;  // sorted by timestamp

    void validate() const {
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (events[i].channel > 1) throw InvalidInput("PhotonStream: channel must be 0 or 1");
            if (i > 0 && events[i].t_ps < events[i - 1].t_ps)
                throw InvalidInput("PhotonStream: timestamps must be non-decreasing");
        }
    }
};

enum class Normalization { raw, large_tau_unity };

struct CoincidenceHistogram {
    std::vector<double> bin_edges_ns;     // size counts.size() + 1
    std::vector<std::uint64_t> counts;
    std::vector<double> normalized;       // empty when raw
    Normalization normalization = Normalization::raw;

    double bin_center_ns(std::size_t i) const {
        return 0.5 * (bin_edges_ns[i] + bin_edges_ns[i + 1]);
    }
};

/// Expected number of stored events for a config, used for the memory cap.
inline double expected_event_count(const SimConfig& cfg) {
    const double rho2 = dynamics::steady_state(cfg.rates, cfg.power_uW)[1];
    const double signal_cps =
        cfg.detection_efficiency * cfg.rates.k21_MHz * 1e6 * rho2;
    return (signal_cps + cfg.background_rate_cps) * cfg.duration_s;
}

/// Run the jump process and return the detected, time-sorted photon stream.
inline PhotonStream simulate(const SimConfig& cfg) {
    cfg.validate();

    const double expected = expected_event_count(cfg);
    if (expected > static_cast<double>(cfg.max_events))
        throw CapacityError("simulate: expected ~" + std::to_string(static_cast<long long>(expected)) +
                            " events, above the cap of " + std::to_string(cfg.max_events) +
                            "; shorten the run or lower the efficiency");

    rng::SplitMix64 gen(cfg.seed);
    PhotonStream out;
    out.events.reserve(static_cast<std::size_t>(expected * 1.1) + 64);

    const double k12 = cfg.rates.sigma_MHz_per_uW * cfg.power_uW * 1e6;  // s^-1
    const double k21 = cfg.rates.k21_MHz * 1e6;
    const double k23 = cfg.rates.k23_MHz * 1e6;
    const double deshelve = dynamics::k31(cfg.rates, cfg.power_uW) * 1e6;
    const double jitter_sigma_ps = cfg.jitter_fwhm_ns * 1e3 / std::sqrt(8.0 * math::kLn2);

    int state = 1;
    double t = 0.0;  // seconds
    while (true) {
        double escape = 0.0;
        switch (state) {
            case 1: escape = k12; break;
            case 2: escape = k21 + k23; break;
            case 3: escape = deshelve; break;
        }
        if (escape <= 0.0) break;  // absorbing under this excitation
        t += gen.exponential(escape);
        if (t >= cfg.duration_s) break;

        if (state == 1) {
            state = 2;
        } else if (state == 2) {
            if (gen.uniform01() < k21 / (k21 + k23)) {
                state = 1;
                if (cfg.detection_efficiency > 0.0 && gen.bernoulli(cfg.detection_efficiency)) {
                    double t_ps = t * 1e12;
                    if (jitter_sigma_ps > 0.0) t_ps += jitter_sigma_ps * gen.normal();
                    const std::uint8_t ch = gen.bernoulli(0.5) ? 1 : 0;
                    // jitter may push an early click before t=0; the file
                    // format carries unsigned timestamps
                    out.events.push_back({std::max<std::int64_t>(std::llround(t_ps), 0), ch});
                }
            } else {
                state = 3;
            }
        } else {
            state = 1;
        }
    }

    if (cfg.background_rate_cps > 0.0) {
        double tb = 0.0;
        while (true) {
            tb += gen.exponential(cfg.background_rate_cps);
            if (tb >= cfg.duration_s) break;
            const std::uint8_t ch = gen.bernoulli(0.5) ? 1 : 0;
            out.events.push_back({static_cast<std::int64_t>(std::llround(tb * 1e12)), ch});
        }
    }

    std::sort(out.events.begin(), out.events.end(),
              [](const PhotonEvent& a, const PhotonEvent& b) {
                  return a.t_ps != b.t_ps ? a.t_ps < b.t_ps : a.channel < b.channel;
              });

    if (cfg.dead_time_ns > 0.0) {
        const auto dead_ps = static_cast<std::int64_t>(std::llround(cfg.dead_time_ns * 1e3));
        std::array<std::int64_t, 2> last{std::numeric_limits<std::int64_t>::min(),
                                         std::numeric_limits<std::int64_t>::min()};
        std::vector<PhotonEvent> kept;
        kept.reserve(out.events.size());
        for (const auto& ev : out.events) {
            if (last[ev.channel] == std::numeric_limits<std::int64_t>::min() ||
                ev.t_ps - last[ev.channel] >= dead_ps) {
                kept.push_back(ev);
                last[ev.channel] = ev.t_ps;
            }
        }
        out.events = std::move(kept);
    }

    return out;
}

struct StreamStats {
    std::size_t counts_ch0 = 0;
    std::size_t counts_ch1 = 0;
    std::size_t total = 0;
    double span_s = 0.0;
    double rate_ch0_cps = 0.0;
    double rate_ch1_cps = 0.0;
};

inline StreamStats stream_stats(const PhotonStream& s) {
    s.validate();
    if (s.events.empty()) throw InvalidInput("stream_stats: empty stream");
    StreamStats st;
    st.total = s.events.size();
    for (const auto& ev : s.events) (ev.channel == 0 ? st.counts_ch0 : st.counts_ch1)++;
    st.span_s = static_cast<double>(s.events.back().t_ps - s.events.front().t_ps) * 1e-12;
    if (!(st.span_s > 0.0)) throw InvalidInput("stream_stats: zero time span");
    st.rate_ch0_cps = static_cast<double>(st.counts_ch0) / st.span_s;
    st.rate_ch1_cps = static_cast<double>(st.counts_ch1) / st.span_s;
    return st;
}

/// Histogram of pairwise delays (channel 1 minus channel 0) within
/// +-max_tau, bins centered so one bin straddles zero delay. Normalized
/// form divides by r0 * r1 * T * bin_width.
inline CoincidenceHistogram correlate(const PhotonStream& s, double bin_width_ns, double max_tau_ns,
                                      Normalization norm = Normalization::large_tau_unity) {
    s.validate();
    if (!(bin_width_ns > 0.0) || !(max_tau_ns > bin_width_ns))
        throw InvalidInput("correlate: need 0 < bin_width < max_tau");

    std::vector<std::int64_t> t0, t1;
    for (const auto& ev : s.events) (ev.channel == 0 ? t0 : t1).push_back(ev.t_ps);
    if (t0.empty() || t1.empty()) throw InvalidInput("correlate: a channel has no events");

    const auto half = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(max_tau_ns / bin_width_ns - 0.5)));
    const std::size_t nbins = 2 * half + 1;
    const double lo_ns = -(static_cast<double>(half) + 0.5) * bin_width_ns;
    const auto window_ps = static_cast<std::int64_t>(std::llround(-lo_ns * 1e3));

    CoincidenceHistogram h;
    h.normalization = norm;
    h.counts.assign(nbins, 0);
    h.bin_edges_ns.resize(nbins + 1);
    for (std::size_t i = 0; i <= nbins; ++i)
        h.bin_edges_ns[i] = lo_ns + static_cast<double>(i) * bin_width_ns;

    std::size_t lo = 0;
    for (const auto t : t0) {
        while (lo < t1.size() && t1[lo] < t - window_ps) ++lo;
        for (std::size_t j = lo; j < t1.size() && t1[j] <= t + window_ps; ++j) {
            const double delta_ns = static_cast<double>(t1[j] - t) * 1e-3;
            const double pos = (delta_ns - lo_ns) / bin_width_ns;
            if (pos < 0.0) continue;
            const auto bin = static_cast<std::size_t>(pos);
            if (bin < nbins) h.counts[bin]++;
        }
    }

    if (norm == Normalization::large_tau_unity) {
        const auto st = stream_stats(s);
        const double expected =
            st.rate_ch0_cps * st.rate_ch1_cps * st.span_s * bin_width_ns * 1e-9;
        if (!(expected > 0.0)) throw NumericalError("correlate: cannot normalize, zero rate");
        h.normalized.resize(nbins);
        for (std::size_t i = 0; i < nbins; ++i)
            h.normalized[i] = static_cast<double>(h.counts[i]) / expected;
    }
    return h;
}

/// Convert a normalized histogram to a correlation curve for fitting.
inline dynamics::G2Curve to_g2_curve(const CoincidenceHistogram& h) {
    if (h.normalized.empty()) throw InvalidInput("to_g2_curve: histogram is not normalized");
    dynamics::G2Curve c;
    c.bin_width_ns = h.bin_edges_ns[1] - h.bin_edges_ns[0];
    c.delays_ns.reserve(h.normalized.size());
    for (std::size_t i = 0; i < h.normalized.size(); ++i) c.delays_ns.push_back(h.bin_center_ns(i));
    c.values = h.normalized;
    return c;
}

}  // namespace sivspec::photonmc
