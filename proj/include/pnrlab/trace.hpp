#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pnrlab/detector.hpp"
#include "pnrlab/rng.hpp"

namespace pnrlab {

/// Waveform synthesis/decoding parameters. Defaults follow the modeled
/// readout chain: 1.09 ns slot spacing, 40 GS/s sampling, a double-
/// exponential pulse that fits inside one slot, and a weak slow ripple that
/// each fired pulse injects into everything after it.
struct TraceConfig {
    double slot_delay_s = 1.09e-9;
    double sample_rate_hz = 4e10;
    double pulse_rise_s = 1e-10;
    double pulse_fall_s = 4e-10;
    double amplitude = 1.0;
    double noise_sigma = 0.0;
    double ripple_coeff = 0.02;

    double dt() const { return 1.0 / sample_rate_hz; }
    int samples_per_slot() const { return static_cast<int>(sample_rate_hz * slot_delay_s); }

    void validate() const {
        if (!(slot_delay_s > 0.0) || !(sample_rate_hz > 0.0) || !(pulse_rise_s > 0.0) ||
            !(pulse_fall_s > 0.0) || !(amplitude > 0.0))
            throw std::invalid_argument("TraceConfig: times and amplitude must be > 0");
        if (noise_sigma < 0.0 || ripple_coeff < 0.0)
            throw std::invalid_argument("TraceConfig: noise_sigma and ripple_coeff must be >= 0");
        if (sample_rate_hz * slot_delay_s < 8.0)
            throw std::invalid_argument("TraceConfig: need >= 8 samples per slot");
    }
};

/// Sampled voltage trace covering `slots` pixel time slots plus a guard band.
struct TraceFrame {
    std::vector<double> samples;
    double t0 = 0.0;
    double dt = 0.0;
    int slots = 0;
};

namespace detail {

// Peak height of the raw double-exponential (1 - e^{-t/rise}) e^{-t/fall}.
inline double template_peak(const TraceConfig& cfg) {
    const double t_peak = cfg.pulse_rise_s * std::log(1.0 + cfg.pulse_fall_s / cfg.pulse_rise_s);
    return (1.0 - std::exp(-t_peak / cfg.pulse_rise_s)) * std::exp(-t_peak / cfg.pulse_fall_s);
}

// Unit-height double-exponential template, zero for t <= 0.
inline double pulse_template(double t, const TraceConfig& cfg) {
    if (t <= 0.0) return 0.0;
    const double raw = (1.0 - std::exp(-t / cfg.pulse_rise_s)) * std::exp(-t / cfg.pulse_fall_s);
    return raw / template_peak(cfg);
}

// Sub-sample nudge: k * slot_delay / dt can land an ulp to either side of an
// exact integer, and a one-sample boundary wobble moves per-slot extrema by
// a visible fraction of the pulse height.
inline constexpr double kBoundaryNudge = 1e-6;

inline int slot_start_sample(int slot, const TraceConfig& cfg) {
    return static_cast<int>(std::floor(slot * cfg.slot_delay_s / cfg.dt() + kBoundaryNudge));
}

}  // namespace detail

/// Threshold halfway up the nominal pulse height.
inline double default_threshold(const TraceConfig& cfg) { return 0.5 * cfg.amplitude; }

/// Synthesizes the time-multiplexed readout waveform for one shot. Each
/// fired pixel k contributes a pulse starting at k * slot_delay plus a slow
/// exponential ripple (time constant 20 slots) that raises the background of
/// everything after it; white Gaussian noise is added on top.
inline TraceFrame synthesize_trace(const ClickPattern& pattern, const TraceConfig& cfg, Rng& rng) {
    cfg.validate();
    const int slots = static_cast<int>(pattern.fired.size());
    const double dt = cfg.dt();
    const int guard = 2 * cfg.samples_per_slot();
    const int n = static_cast<int>(std::ceil(slots * cfg.slot_delay_s / dt)) + guard;

    TraceFrame frame;
    frame.dt = dt;
    frame.slots = slots;
    frame.samples.assign(static_cast<std::size_t>(n), 0.0);

    const double ripple_tau = 20.0 * cfg.slot_delay_s;
    // Pulse support: beyond ~28 fall times the template is below 1e-12.
    const double pulse_span = 28.0 * cfg.pulse_fall_s;
    const double inv_peak = cfg.amplitude / detail::template_peak(cfg);

    // Ripples injected at pulse onsets, accumulated in one decay pass.
    std::vector<double> ripple_injection;
    if (cfg.ripple_coeff > 0.0) ripple_injection.assign(static_cast<std::size_t>(n), 0.0);

    for (int k = 0; k < slots; ++k) {
        if (!pattern.fired[static_cast<std::size_t>(k)]) continue;
        const double t_k = k * cfg.slot_delay_s;
        const int i0 = static_cast<int>(std::floor(t_k / dt + detail::kBoundaryNudge)) + 1;
        const int i1 = std::min(n, static_cast<int>(std::ceil((t_k + pulse_span) / dt)));
        for (int i = std::max(0, i0); i < i1; ++i) {
            const double t = i * dt - t_k;
            if (t <= 0.0) continue;
            frame.samples[static_cast<std::size_t>(i)] +=
                inv_peak * (1.0 - std::exp(-t / cfg.pulse_rise_s)) * std::exp(-t / cfg.pulse_fall_s);
        }
        if (cfg.ripple_coeff > 0.0) {
            // first sample at or after t_k
            const int ir = std::max(0, static_cast<int>(std::ceil(t_k / dt - detail::kBoundaryNudge)));
            if (ir < n)
                ripple_injection[static_cast<std::size_t>(ir)] +=
                    cfg.ripple_coeff * cfg.amplitude *
                    std::exp(-std::max(0.0, ir * dt - t_k) / ripple_tau);
        }
    }

    if (cfg.ripple_coeff > 0.0) {
        const double decay = std::exp(-dt / ripple_tau);
        double level = 0.0;
        for (int i = 0; i < n; ++i) {
            level += ripple_injection[static_cast<std::size_t>(i)];
            frame.samples[static_cast<std::size_t>(i)] += level;
            level *= decay;
        }
    }

    if (cfg.noise_sigma > 0.0)
        for (auto& v : frame.samples) v += cfg.noise_sigma * rng.normal();
    return frame;
}

/// Per-slot peak and background of a frame, measured on the raw samples:
/// peak is the slot maximum, background the slot minimum. On noiseless
/// frames peak/background tracks how the accumulated ripple degrades later
/// slots.
struct SlotMetrics {
    double peak = 0.0;
    double background = 0.0;
};

inline std::vector<SlotMetrics> slot_metrics(const TraceFrame& frame, const TraceConfig& cfg) {
    std::vector<SlotMetrics> metrics(static_cast<std::size_t>(frame.slots));
    for (int k = 0; k < frame.slots; ++k) {
        const int s0 = detail::slot_start_sample(k, cfg);
        const int s1 = std::min(static_cast<int>(frame.samples.size()),
                                detail::slot_start_sample(k + 1, cfg));
        double mx = -1e300, mn = 1e300;
        for (int i = s0; i < s1; ++i) {
            mx = std::max(mx, frame.samples[static_cast<std::size_t>(i)]);
            mn = std::min(mn, frame.samples[static_cast<std::size_t>(i)]);
        }
        metrics[static_cast<std::size_t>(k)] = {mx, mn};
    }
    return metrics;
}

/// Recovers the click pattern from a waveform.
///
/// Per slot: smooth with a short boxcar (about a sixth of a slot, which
/// matches the pulse width and cuts the white-noise sigma by ~sqrt(7)),
/// estimate each slot's background as its minimum smoothed sample, subtract
/// a moving median (window 3 slots) of those backgrounds, and fire the slot
/// iff the peak of the result exceeds the threshold. The slot-minimum
/// background stays clean even when every neighboring slot carries a pulse,
/// where a plain moving median of samples sits on the pulse tails and leaves
/// no noise margin.
inline ClickPattern decode_trace(const TraceFrame& frame, double threshold,
                                 const TraceConfig& cfg) {
    cfg.validate();
    if (!(threshold > 0.0)) throw std::invalid_argument("decode_trace: threshold must be > 0");
    const int n = static_cast<int>(frame.samples.size());
    const int slots = frame.slots;
    if (slots < 1 || n < detail::slot_start_sample(slots, cfg))
        throw std::invalid_argument("decode_trace: frame too short for its slot count");

    // boxcar smoothing via prefix sums
    const int smooth_w = std::max(1, cfg.samples_per_slot() / 6);
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i)
        prefix[static_cast<std::size_t>(i) + 1] =
            prefix[static_cast<std::size_t>(i)] + frame.samples[static_cast<std::size_t>(i)];
    std::vector<double> smooth(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - smooth_w / 2);
        const int hi = std::min(n, lo + smooth_w);
        smooth[static_cast<std::size_t>(i)] =
            (prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)]) /
            (hi - lo);
    }

    std::vector<double> slot_max(static_cast<std::size_t>(slots), -1e300);
    std::vector<double> slot_min(static_cast<std::size_t>(slots), 1e300);
    for (int k = 0; k < slots; ++k) {
        const int s0 = detail::slot_start_sample(k, cfg);
        const int s1 = std::min(n, detail::slot_start_sample(k + 1, cfg));
        for (int i = s0; i < s1; ++i) {
            slot_max[static_cast<std::size_t>(k)] =
                std::max(slot_max[static_cast<std::size_t>(k)], smooth[static_cast<std::size_t>(i)]);
            slot_min[static_cast<std::size_t>(k)] =
                std::min(slot_min[static_cast<std::size_t>(k)], smooth[static_cast<std::size_t>(i)]);
        }
    }

    ClickPattern pattern;
    pattern.fired.assign(static_cast<std::size_t>(slots), 0);
    for (int k = 0; k < slots; ++k) {
        double b[3] = {slot_min[static_cast<std::size_t>(std::max(0, k - 1))],
                       slot_min[static_cast<std::size_t>(k)],
                       slot_min[static_cast<std::size_t>(std::min(slots - 1, k + 1))]};
        std::sort(b, b + 3);
        const double baseline = b[1];
        pattern.fired[static_cast<std::size_t>(k)] =
            (slot_max[static_cast<std::size_t>(k)] - baseline > threshold) ? 1 : 0;
    }
    pattern.detected_n =
        static_cast<int>(std::count(pattern.fired.begin(), pattern.fired.end(), 1));
    pattern.true_n = pattern.detected_n;  // a decoded frame carries no truth
    return pattern;
}

}  // namespace pnrlab
