#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pnrlab/parallel.hpp"
#include "pnrlab/pmf.hpp"
#include "pnrlab/rng.hpp"

namespace pnrlab {

/// Detector array configuration. `ideal_pnr` bypasses pixel allocation and
/// reports the true photon number, isolating statistics from saturation.
/// `pixel_weights`, when non-empty, biases photon allocation for sensitivity
/// studies; empty means uniform.
struct ArrayConfig {
    int pixel_count = 100;
    double efficiency = 1.0;
    std::uint64_t seed = 0;
    bool ideal_pnr = false;
    std::vector<double> pixel_weights{};

    void validate() const {
        if (pixel_count < 1) throw std::invalid_argument("ArrayConfig: pixel_count must be >= 1");
        if (!(efficiency > 0.0) || efficiency > 1.0)
            throw std::invalid_argument("ArrayConfig: efficiency must be in (0, 1]");
        if (!pixel_weights.empty()) {
            if (static_cast<int>(pixel_weights.size()) != pixel_count)
                throw std::invalid_argument("ArrayConfig: pixel_weights length != pixel_count");
            double sum = 0.0;
            for (double w : pixel_weights) {
                if (w < 0.0) throw std::invalid_argument("ArrayConfig: negative pixel weight");
                sum += w;
            }
            if (!(sum > 0.0)) throw std::invalid_argument("ArrayConfig: pixel weights sum to 0");
        }
    }
};

/// Per-shot firing record: which pixels clicked, how many photons arrived,
/// and how many clicks resulted (a saturation-biased undercount).
struct ClickPattern {
    std::vector<std::uint8_t> fired;
    int true_n = 0;
    int detected_n = 0;
};

/// Assignment of every pixel to one of `group_count` groups.
struct GroupingPlan {
    std::vector<int> assignment;
    int group_count = 0;

    std::vector<int> group_sizes() const {
        std::vector<int> sizes(static_cast<std::size_t>(group_count), 0);
        for (int g : assignment) ++sizes[static_cast<std::size_t>(g)];
        return sizes;
    }
};

/// One optical pulse through the array: per-photon Bernoulli(efficiency)
/// loss, then each survivor lands on a uniformly random pixel (or
/// weight-biased when configured); a pixel fires if it receives >= 1 photon.
inline ClickPattern detect_shot(int n_photons, const ArrayConfig& cfg, Rng& rng) {
    if (n_photons < 0) throw std::invalid_argument("detect_shot: n_photons must be >= 0");
    ClickPattern pattern;
    pattern.true_n = n_photons;
    pattern.fired.assign(static_cast<std::size_t>(cfg.pixel_count), 0);

    std::vector<double> weight_cdf;
    if (!cfg.pixel_weights.empty()) {
        weight_cdf.resize(cfg.pixel_weights.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < cfg.pixel_weights.size(); ++i) {
            sum += cfg.pixel_weights[i];
            weight_cdf[i] = sum;
        }
    }

    for (int p = 0; p < n_photons; ++p) {
        if (cfg.efficiency < 1.0 && !rng.bernoulli(cfg.efficiency)) continue;
        int pixel;
        if (weight_cdf.empty()) {
            pixel = rng.uniform_index(cfg.pixel_count);
        } else {
            const double u = rng.uniform() * weight_cdf.back();
            pixel = static_cast<int>(
                std::upper_bound(weight_cdf.begin(), weight_cdf.end(), u) - weight_cdf.begin());
            pixel = std::min(pixel, cfg.pixel_count - 1);
        }
        pattern.fired[static_cast<std::size_t>(pixel)] = 1;
    }
    pattern.detected_n =
        static_cast<int>(std::count(pattern.fired.begin(), pattern.fired.end(), 1));
    return pattern;
}

/// Contiguous-block grouping with the given sizes.
inline GroupingPlan make_grouping(int pixel_count, const std::vector<int>& group_sizes) {
    GroupingPlan plan;
    plan.group_count = static_cast<int>(group_sizes.size());
    if (plan.group_count < 1) throw std::invalid_argument("make_grouping: need >= 1 group");
    int total = 0;
    for (int s : group_sizes) {
        if (s < 1) throw std::invalid_argument("make_grouping: group sizes must be >= 1");
        total += s;
    }
    if (total != pixel_count)
        throw std::invalid_argument("make_grouping: group sizes must sum to pixel_count");
    plan.assignment.reserve(static_cast<std::size_t>(pixel_count));
    for (int g = 0; g < plan.group_count; ++g)
        plan.assignment.insert(plan.assignment.end(), static_cast<std::size_t>(group_sizes[g]),
                               g);
    return plan;
}

/// Near-equal contiguous blocks: sizes differ by at most one.
inline GroupingPlan make_equal_grouping(int pixel_count, int group_count) {
    if (group_count < 1 || group_count > pixel_count)
        throw std::invalid_argument("make_equal_grouping: need 1 <= groups <= pixels");
    std::vector<int> sizes(static_cast<std::size_t>(group_count), pixel_count / group_count);
    for (int g = 0; g < pixel_count % group_count; ++g) ++sizes[static_cast<std::size_t>(g)];
    return make_grouping(pixel_count, sizes);
}

/// Round-robin grouping; same sizes as make_equal_grouping but interleaved.
inline GroupingPlan make_interleaved_grouping(int pixel_count, int group_count) {
    if (group_count < 1 || group_count > pixel_count)
        throw std::invalid_argument("make_interleaved_grouping: need 1 <= groups <= pixels");
    GroupingPlan plan;
    plan.group_count = group_count;
    plan.assignment.resize(static_cast<std::size_t>(pixel_count));
    for (int i = 0; i < pixel_count; ++i) plan.assignment[static_cast<std::size_t>(i)] = i % group_count;
    return plan;
}

/// Per-group click counts; sums to detected_n.
inline std::vector<int> group_counts(const ClickPattern& pattern, const GroupingPlan& plan) {
    if (plan.assignment.size() != pattern.fired.size())
        throw std::invalid_argument("group_counts: plan does not match pattern length");
    std::vector<int> counts(static_cast<std::size_t>(plan.group_count), 0);
    for (std::size_t i = 0; i < pattern.fired.size(); ++i)
        if (pattern.fired[i]) ++counts[static_cast<std::size_t>(plan.assignment[i])];
    return counts;
}

/// Integer-valued histogram over detected photon number.
struct Histogram {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    void add(int n) {
        if (n < 0) throw std::invalid_argument("Histogram: negative value");
        if (static_cast<std::size_t>(n) >= counts.size())
            counts.resize(static_cast<std::size_t>(n) + 1, 0);
        ++counts[static_cast<std::size_t>(n)];
        ++total;
    }

    void merge(const Histogram& other) {
        if (other.counts.size() > counts.size()) counts.resize(other.counts.size(), 0);
        for (std::size_t i = 0; i < other.counts.size(); ++i) counts[i] += other.counts[i];
        total += other.total;
    }

    double probability(std::size_t n) const {
        if (total == 0 || n >= counts.size()) return 0.0;
        return static_cast<double>(counts[n]) / static_cast<double>(total);
    }

    double mean() const {
        if (total == 0) return 0.0;
        double s = 0.0;
        for (std::size_t n = 0; n < counts.size(); ++n)
            s += static_cast<double>(n) * static_cast<double>(counts[n]);
        return s / static_cast<double>(total);
    }
};

/// Total variation distance between a histogram and an exact pmf.
inline double total_variation(const Histogram& hist, const PhotonPmf& pmf) {
    const std::size_t n_max = std::max(hist.counts.size(), pmf.probs.size());
    double tv = 0.0;
    for (std::size_t n = 0; n < n_max; ++n)
        tv += std::fabs(hist.probability(n) - pmf.prob(static_cast<int>(n)));
    return 0.5 * tv;
}

struct StatisticsResult {
    Histogram histogram;
    PhotonPmf theory;
    std::uint64_t shots = 0;
};

/// Photon-statistics experiment: repeatedly sample the source, run the shot
/// through the array (or report it directly in ideal mode), and histogram
/// the detected photon number next to the exact source pmf.
inline StatisticsResult run_statistics_experiment(const SourceSpec& src, const ArrayConfig& cfg,
                                                  std::uint64_t shots, int workers = 1) {
    if (shots < 1) throw std::invalid_argument("run_statistics_experiment: shots must be >= 1");
    cfg.validate();
    const PhotonPmf pmf = source_pmf(src);
    const PmfSampler sampler(pmf);

    auto blocks = run_shot_blocks<Histogram>(
        shots, cfg.seed, workers, [&](const ShotBlock& block, Rng& rng) {
            Histogram hist;
            for (std::uint64_t s = 0; s < block.shot_count; ++s) {
                const int n = sampler(rng);
                if (cfg.ideal_pnr) {
                    hist.add(n);
                } else {
                    hist.add(detect_shot(n, cfg, rng).detected_n);
                }
            }
            return hist;
        });

    StatisticsResult result;
    result.theory = pmf;
    result.shots = shots;
    for (const Histogram& h : blocks) result.histogram.merge(h);
    return result;
}

}  // namespace pnrlab
