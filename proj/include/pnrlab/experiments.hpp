#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnrlab/detector.hpp"
#include "pnrlab/fock.hpp"
#include "pnrlab/parallel.hpp"
#include "pnrlab/pmf.hpp"

namespace pnrlab {

/// Thrown when a correlation estimate has an empty denominator (some group
/// never fired over the whole run).
class ZeroDenominatorError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// High-order correlation g^(N)
// ---------------------------------------------------------------------------

/// Exact g^(N) of filtered pulsed thermal light with the given time-bandwidth
/// product, as the cancellation-free product prod_{k=1..N} (tbp + k)/(tbp + 1).
/// Tends to N! for tbp << 1 and to 1 for tbp >> 1.
inline double gn_theory(int order_n, double tbp) {
    if (order_n < 1) throw std::invalid_argument("gn_theory: order must be >= 1");
    if (!(tbp > 0.0) || !std::isfinite(tbp))
        throw std::invalid_argument("gn_theory: tbp must be finite and > 0");
    double g = 1.0;
    for (int k = 1; k <= order_n; ++k) g *= (tbp + k) / (tbp + 1.0);
    return g;
}

struct GnResult {
    int order_n = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double theory = 0.0;
    std::uint64_t shots = 0;
    std::vector<int> group_sizes;
};

namespace detail {

inline constexpr int kJackknifeBlocks = 100;

struct GnBlockSums {
    std::vector<double> product;             // per jackknife block
    std::vector<std::vector<double>> group;  // [group][jackknife block]
    std::vector<std::uint64_t> count;        // per jackknife block
};

}  // namespace detail

/// Monte Carlo estimate of g^(N) = <n_1 ... n_N> / (<n_1> ... <n_N>) by
/// splitting the array into N groups and correlating the per-group counts.
/// Group means come from the same run; the standard error is a jackknife
/// over 100 shot blocks.
inline GnResult gn_estimate(const SourceSpec& src, const ArrayConfig& cfg, int order_n,
                            std::uint64_t shots, int workers = 1,
                            const std::optional<GroupingPlan>& plan_opt = std::nullopt) {
    if (order_n < 1) throw std::invalid_argument("gn_estimate: order must be >= 1");
    if (shots < 1) throw std::invalid_argument("gn_estimate: shots must be >= 1");
    cfg.validate();
    const GroupingPlan plan = plan_opt.value_or(make_equal_grouping(cfg.pixel_count, order_n));
    if (plan.group_count != order_n)
        throw std::invalid_argument("gn_estimate: plan group count != order");
    if (static_cast<int>(plan.assignment.size()) != cfg.pixel_count)
        throw std::invalid_argument("gn_estimate: plan does not match pixel count");

    const PhotonPmf pmf = source_pmf(src);
    const PmfSampler sampler(pmf);
    const int n_jk = detail::kJackknifeBlocks;
    const std::size_t n_groups = static_cast<std::size_t>(order_n);

    auto blocks = run_shot_blocks<detail::GnBlockSums>(
        shots, cfg.seed, workers, [&](const ShotBlock& block, Rng& rng) {
            detail::GnBlockSums sums;
            sums.product.assign(static_cast<std::size_t>(n_jk), 0.0);
            sums.count.assign(static_cast<std::size_t>(n_jk), 0);
            sums.group.assign(n_groups, std::vector<double>(static_cast<std::size_t>(n_jk), 0.0));
            std::vector<int> counts(n_groups);
            for (std::uint64_t s = 0; s < block.shot_count; ++s) {
                const std::uint64_t shot = block.shot_begin + s;
                const std::size_t jk = static_cast<std::size_t>(
                    shot * static_cast<std::uint64_t>(n_jk) / shots);
                const int n = sampler(rng);
                std::fill(counts.begin(), counts.end(), 0);
                if (cfg.ideal_pnr) {
                    // no saturation: every photon counts toward its group
                    for (int p = 0; p < n; ++p) {
                        if (cfg.efficiency < 1.0 && !rng.bernoulli(cfg.efficiency)) continue;
                        const int pixel = rng.uniform_index(cfg.pixel_count);
                        ++counts[static_cast<std::size_t>(
                            plan.assignment[static_cast<std::size_t>(pixel)])];
                    }
                } else {
                    const ClickPattern pattern = detect_shot(n, cfg, rng);
                    const std::vector<int> gc = group_counts(pattern, plan);
                    std::copy(gc.begin(), gc.end(), counts.begin());
                }
                double prod = 1.0;
                for (std::size_t g = 0; g < n_groups; ++g) {
                    prod *= counts[g];
                    sums.group[g][jk] += counts[g];
                }
                sums.product[jk] += prod;
                ++sums.count[jk];
            }
            return sums;
        });

    // merge in block order
    std::vector<double> product(static_cast<std::size_t>(n_jk), 0.0);
    std::vector<std::uint64_t> count(static_cast<std::size_t>(n_jk), 0);
    std::vector<std::vector<double>> group(n_groups,
                                           std::vector<double>(static_cast<std::size_t>(n_jk), 0.0));
    for (const auto& b : blocks) {
        for (int j = 0; j < n_jk; ++j) {
            product[static_cast<std::size_t>(j)] += b.product[static_cast<std::size_t>(j)];
            count[static_cast<std::size_t>(j)] += b.count[static_cast<std::size_t>(j)];
            for (std::size_t g = 0; g < n_groups; ++g)
                group[g][static_cast<std::size_t>(j)] += b.group[g][static_cast<std::size_t>(j)];
        }
    }

    auto ratio = [&](int leave_out) -> double {
        double p_sum = 0.0;
        std::uint64_t n_sum = 0;
        std::vector<double> g_sum(n_groups, 0.0);
        for (int j = 0; j < n_jk; ++j) {
            if (j == leave_out) continue;
            p_sum += product[static_cast<std::size_t>(j)];
            n_sum += count[static_cast<std::size_t>(j)];
            for (std::size_t g = 0; g < n_groups; ++g) g_sum[g] += group[g][static_cast<std::size_t>(j)];
        }
        if (n_sum == 0) throw ZeroDenominatorError("gn_estimate: empty shot set");
        double denom = 1.0;
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double mean_g = g_sum[g] / static_cast<double>(n_sum);
            if (!(mean_g > 0.0))
                throw ZeroDenominatorError("gn_estimate: group " + std::to_string(g) +
                                           " has zero mean count");
            denom *= mean_g;
        }
        return (p_sum / static_cast<double>(n_sum)) / denom;
    };

    GnResult result;
    result.order_n = order_n;
    result.shots = shots;
    result.group_sizes = plan.group_sizes();
    result.estimate = ratio(-1);
    if (src.kind == SourceKind::Thermal) result.theory = gn_theory(order_n, src.tbp());
    else result.theory = 1.0;

    // jackknife over shot blocks
    std::vector<double> leave_out(static_cast<std::size_t>(n_jk));
    double jk_mean = 0.0;
    for (int j = 0; j < n_jk; ++j) {
        leave_out[static_cast<std::size_t>(j)] = ratio(j);
        jk_mean += leave_out[static_cast<std::size_t>(j)];
    }
    jk_mean /= n_jk;
    double ss = 0.0;
    for (double v : leave_out) ss += (v - jk_mean) * (v - jk_mean);
    result.std_error = std::sqrt(ss * (n_jk - 1.0) / n_jk);
    return result;
}

// ---------------------------------------------------------------------------
// Photon subtraction
// ---------------------------------------------------------------------------

/// Mean photon number transmitted through a (1-R) tap conditioned on
/// subtracting n_r photons at the reflection port, for a thermal input with
/// the given time-bandwidth product.
inline double subtraction_theory_mean(double tbp, double mean_in, double reflect_fraction,
                                      int n_r) {
    if (!(tbp > 0.0)) throw std::invalid_argument("subtraction_theory_mean: tbp must be > 0");
    if (!(reflect_fraction > 0.0) || reflect_fraction >= 1.0)
        throw std::invalid_argument("subtraction_theory_mean: reflect fraction must be in (0, 1)");
    if (n_r < 0) throw std::invalid_argument("subtraction_theory_mean: n_r must be >= 0");
    return (1.0 - reflect_fraction) * (n_r + tbp + 1.0) /
           (reflect_fraction * mean_in + tbp + 1.0) * mean_in;
}

/// Photon-number enhancement of the subtracted thermal state,
/// mean_T(n_R = M) / mean_T(n_R = 0) = (tbp + M + 1) / (tbp + 1).
inline double enhancement_theory(double tbp, int subtracted_m) {
    if (!(tbp > 0.0)) throw std::invalid_argument("enhancement_theory: tbp must be > 0");
    if (subtracted_m < 0) throw std::invalid_argument("enhancement_theory: M must be >= 0");
    return (tbp + subtracted_m + 1.0) / (tbp + 1.0);
}

struct SubtractionResult {
    int conditioned_on_nr = 0;
    Histogram histogram_t;
    double mean_t = 0.0;
    double mean_t_std_error = 0.0;
    double theory_mean_t = 0.0;
    double enhancement = 0.0;
    double enhancement_std_error = 0.0;
    double theory_enhancement = 0.0;
    PhotonPmf theory_pmf_t;
    std::uint64_t conditioned_shots = 0;
    std::uint64_t shots = 0;
    bool insufficient_samples = false;  // conditioned shot count < 1000
};

namespace detail {

struct SubtractionBlockSums {
    // indexed by observed n_R, grown on demand
    std::vector<std::uint64_t> count;
    std::vector<double> sum_t;
    std::vector<double> sumsq_t;
    std::vector<Histogram> hist;  // only for requested conditions

    void ensure(std::size_t n_r) {
        if (n_r >= count.size()) {
            count.resize(n_r + 1, 0);
            sum_t.resize(n_r + 1, 0.0);
            sumsq_t.resize(n_r + 1, 0.0);
        }
    }
};

}  // namespace detail

/// Photon-subtraction experiment: split the array into a reflection group of
/// `reflect_pixels` and a transmission group, and collect the transmitted
/// count statistics conditioned on each requested reflected count. One pass
/// serves all requested conditions; enhancement is referenced to n_R = 0.
inline std::vector<SubtractionResult> run_subtraction_scan(
    const SourceSpec& src, const ArrayConfig& cfg, int reflect_pixels, int transmit_pixels,
    const std::vector<int>& conditions, std::uint64_t shots, int workers = 1) {
    if (shots < 1) throw std::invalid_argument("run_subtraction_scan: shots must be >= 1");
    if (reflect_pixels < 1 || transmit_pixels < 1 ||
        reflect_pixels + transmit_pixels != cfg.pixel_count)
        throw std::invalid_argument("run_subtraction_scan: split must sum to pixel_count");
    for (int m : conditions)
        if (m < 0) throw std::invalid_argument("run_subtraction_scan: conditions must be >= 0");
    cfg.validate();

    const GroupingPlan plan = make_grouping(cfg.pixel_count, {reflect_pixels, transmit_pixels});
    const double reflect_fraction = static_cast<double>(reflect_pixels) / cfg.pixel_count;
    const PhotonPmf pmf = source_pmf(src);
    const PmfSampler sampler(pmf);

    const int max_condition = *std::max_element(conditions.begin(), conditions.end());
    auto hist_index = [&](int n_r) -> int {
        for (std::size_t i = 0; i < conditions.size(); ++i)
            if (conditions[i] == n_r) return static_cast<int>(i);
        return -1;
    };

    auto blocks = run_shot_blocks<detail::SubtractionBlockSums>(
        shots, cfg.seed, workers, [&](const ShotBlock& block, Rng& rng) {
            detail::SubtractionBlockSums sums;
            sums.ensure(static_cast<std::size_t>(max_condition));
            sums.hist.resize(conditions.size());
            for (std::uint64_t s = 0; s < block.shot_count; ++s) {
                const int n = sampler(rng);
                int n_r = 0, n_t = 0;
                if (cfg.ideal_pnr) {
                    for (int p = 0; p < n; ++p) {
                        if (cfg.efficiency < 1.0 && !rng.bernoulli(cfg.efficiency)) continue;
                        const int pixel = rng.uniform_index(cfg.pixel_count);
                        if (plan.assignment[static_cast<std::size_t>(pixel)] == 0) ++n_r;
                        else ++n_t;
                    }
                } else {
                    const ClickPattern pattern = detect_shot(n, cfg, rng);
                    const std::vector<int> gc = group_counts(pattern, plan);
                    n_r = gc[0];
                    n_t = gc[1];
                }
                sums.ensure(static_cast<std::size_t>(n_r));
                ++sums.count[static_cast<std::size_t>(n_r)];
                sums.sum_t[static_cast<std::size_t>(n_r)] += n_t;
                sums.sumsq_t[static_cast<std::size_t>(n_r)] += static_cast<double>(n_t) * n_t;
                const int hi = hist_index(n_r);
                if (hi >= 0) sums.hist[static_cast<std::size_t>(hi)].add(n_t);
            }
            return sums;
        });

    detail::SubtractionBlockSums total;
    total.ensure(static_cast<std::size_t>(max_condition));
    total.hist.resize(conditions.size());
    for (const auto& b : blocks) {
        total.ensure(b.count.empty() ? 0 : b.count.size() - 1);
        for (std::size_t i = 0; i < b.count.size(); ++i) {
            total.count[i] += b.count[i];
            total.sum_t[i] += b.sum_t[i];
            total.sumsq_t[i] += b.sumsq_t[i];
        }
        for (std::size_t i = 0; i < conditions.size(); ++i) total.hist[i].merge(b.hist[i]);
    }

    auto conditional_mean = [&](int n_r) -> std::pair<double, double> {
        const std::uint64_t c = total.count[static_cast<std::size_t>(n_r)];
        if (c == 0) return {0.0, 0.0};
        const double mean = total.sum_t[static_cast<std::size_t>(n_r)] / static_cast<double>(c);
        const double var =
            std::max(0.0, total.sumsq_t[static_cast<std::size_t>(n_r)] / static_cast<double>(c) -
                              mean * mean);
        return {mean, std::sqrt(var / static_cast<double>(c))};
    };

    const auto [mean0, se0] = conditional_mean(0);
    const bool thermal = src.kind == SourceKind::Thermal;

    std::vector<SubtractionResult> results;
    results.reserve(conditions.size());
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        const int m = conditions[i];
        SubtractionResult r;
        r.conditioned_on_nr = m;
        r.shots = shots;
        r.histogram_t = total.hist[i];
        r.conditioned_shots = total.count[static_cast<std::size_t>(m)];
        const auto [mean_m, se_m] = conditional_mean(m);
        r.mean_t = mean_m;
        r.mean_t_std_error = se_m;
        if (thermal) {
            r.theory_mean_t = subtraction_theory_mean(src.tbp(), src.mean_n, reflect_fraction, m);
            r.theory_enhancement = enhancement_theory(src.tbp(), m);
            r.theory_pmf_t = pmf_negative_binomial(src.tbp() + m, r.theory_mean_t);
        } else {
            // a coherent input factorizes across the tap: no conditioning effect
            r.theory_mean_t = (1.0 - reflect_fraction) * src.mean_n;
            r.theory_enhancement = 1.0;
            r.theory_pmf_t = pmf_poisson(r.theory_mean_t);
        }
        if (mean0 > 0.0) {
            r.enhancement = mean_m / mean0;
            const double rel0 = se0 / mean0;
            const double rel_m = mean_m > 0.0 ? se_m / mean_m : 0.0;
            r.enhancement_std_error = r.enhancement * std::sqrt(rel0 * rel0 + rel_m * rel_m);
        }
        r.insufficient_samples = r.conditioned_shots < 1000;
        results.push_back(std::move(r));
    }
    return results;
}

/// Single-condition photon subtraction; see run_subtraction_scan.
inline SubtractionResult run_subtraction(const SourceSpec& src, const ArrayConfig& cfg,
                                         int reflect_pixels, int transmit_pixels, int condition_nr,
                                         std::uint64_t shots, int workers = 1) {
    return run_subtraction_scan(src, cfg, reflect_pixels, transmit_pixels, {condition_nr}, shots,
                                workers)[0];
}

// ---------------------------------------------------------------------------
// Quantum-limited state discrimination
// ---------------------------------------------------------------------------

enum class ReceiverKind { Direct, Kennedy, GeneralizedKennedy };

/// Receiver for thermal-vs-coherent discrimination at known mean photon
/// number. `transmission` is the signal tap of the displacement stage;
/// `delta_n` is the displacement offset of the generalized receiver,
/// optimized numerically when not set.
struct ReceiverConfig {
    ReceiverKind kind = ReceiverKind::Direct;
    double transmission = 1.0;
    std::optional<double> delta_n{};

    void validate() const {
        if (!(transmission > 0.0) || transmission > 1.0)
            throw std::invalid_argument("ReceiverConfig: transmission must be in (0, 1]");
        if (delta_n && (!std::isfinite(*delta_n) || *delta_n < 0.0))
            throw std::invalid_argument("ReceiverConfig: delta_n must be finite and >= 0");
    }
};

namespace detail {

// Bayes error for equal priors given the two class pmfs:
// 0.5 * sum_n min(P(n | class 0), P(n | class 1)).
inline double min_overlap_error(const PhotonPmf& a, const PhotonPmf& b) {
    const int n_max = std::max(a.cutoff, b.cutoff);
    double s = 0.0;
    for (int n = 0; n <= n_max; ++n) s += std::min(a.prob(n), b.prob(n));
    return 0.5 * s;
}

}  // namespace detail

/// Error probability of the generalized displacement receiver at a fixed
/// displacement offset.
inline double gk_error(double mean_n, double transmission, double delta_n) {
    const PhotonPmf coherent_class = pmf_poisson(delta_n);
    const PhotonPmf thermal_class = pmf_laguerre(mean_n, transmission, delta_n);
    return detail::min_overlap_error(coherent_class, thermal_class);
}

/// Displacement offset minimizing gk_error: 64-point coarse grid on
/// [0, 5 mean_n + 5], then golden-section refinement around the best point.
inline double optimize_delta_n(double mean_n, double transmission) {
    if (!std::isfinite(mean_n) || mean_n < 0.0)
        throw std::invalid_argument("optimize_delta_n: mean_n must be finite and >= 0");
    if (mean_n == 0.0) return 0.0;

    const double hi = 5.0 * mean_n + 5.0;
    constexpr int kGridPoints = 64;
    double best_x = 0.0;
    double best_f = gk_error(mean_n, transmission, 0.0);
    int best_i = 0;
    std::vector<double> grid_f(kGridPoints + 1);
    for (int i = 0; i <= kGridPoints; ++i) {
        const double x = hi * i / kGridPoints;
        const double f = gk_error(mean_n, transmission, x);
        grid_f[static_cast<std::size_t>(i)] = f;
        if (f < best_f) {
            best_f = f;
            best_x = x;
            best_i = i;
        }
    }

    double lo_x = hi * std::max(0, best_i - 1) / kGridPoints;
    double hi_x = hi * std::min(kGridPoints, best_i + 1) / kGridPoints;
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi_x - golden * (hi_x - lo_x);
    double x2 = lo_x + golden * (hi_x - lo_x);
    double f1 = gk_error(mean_n, transmission, x1);
    double f2 = gk_error(mean_n, transmission, x2);
    while (hi_x - lo_x > 1e-10 * (1.0 + hi_x)) {
        if (f1 < f2) {
            hi_x = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi_x - golden * (hi_x - lo_x);
            f1 = gk_error(mean_n, transmission, x1);
        } else {
            lo_x = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo_x + golden * (hi_x - lo_x);
            f2 = gk_error(mean_n, transmission, x2);
        }
        if (f1 < best_f) {
            best_f = f1;
            best_x = x1;
        }
        if (f2 < best_f) {
            best_f = f2;
            best_x = x2;
        }
    }
    return best_x;
}

/// Per-receiver post-measurement pmfs for the two hypotheses.
struct ReceiverModel {
    PhotonPmf thermal_class;
    PhotonPmf coherent_class;
    double delta_n_used = 0.0;
};

inline ReceiverModel receiver_model(const ReceiverConfig& cfg, double mean_n) {
    cfg.validate();
    if (!std::isfinite(mean_n) || mean_n < 0.0)
        throw std::invalid_argument("receiver_model: mean_n must be finite and >= 0");
    ReceiverModel model;
    switch (cfg.kind) {
        case ReceiverKind::Direct:
            model.thermal_class = pmf_bose_einstein(mean_n);
            model.coherent_class = pmf_poisson(mean_n);
            break;
        case ReceiverKind::Kennedy:
            model.thermal_class = pmf_laguerre(mean_n, cfg.transmission, 0.0);
            model.coherent_class = pmf_poisson(0.0);  // exact nulling
            break;
        case ReceiverKind::GeneralizedKennedy: {
            const double dn =
                cfg.delta_n ? *cfg.delta_n : optimize_delta_n(mean_n, cfg.transmission);
            model.delta_n_used = dn;
            model.thermal_class = pmf_laguerre(mean_n, cfg.transmission, dn);
            model.coherent_class = pmf_poisson(dn);
            break;
        }
    }
    return model;
}

/// Exact error probability of the maximum-likelihood decision for the given
/// receiver under equal priors.
inline double receiver_error_theory(const ReceiverConfig& cfg, double mean_n) {
    const ReceiverModel model = receiver_model(cfg, mean_n);
    return detail::min_overlap_error(model.thermal_class, model.coherent_class);
}

struct DiscriminationResult {
    double error_rate = 0.0;
    double std_error = 0.0;
    double theory = 0.0;
    double delta_n_used = 0.0;
    std::uint64_t shots = 0;
};

/// Monte Carlo discrimination run: per shot, flip a fair coin for the true
/// class, draw a count from that class's post-measurement pmf, decide by
/// maximum likelihood (ties favor coherent), and tally errors. A detector
/// array can be composed in front so saturation folds into the counts.
inline DiscriminationResult run_discrimination(
    double mean_n, const ReceiverConfig& receiver, std::uint64_t shots, std::uint64_t seed,
    int workers = 1, const std::optional<ArrayConfig>& through_array = std::nullopt) {
    if (shots < 1) throw std::invalid_argument("run_discrimination: shots must be >= 1");
    const ReceiverModel model = receiver_model(receiver, mean_n);
    const PmfSampler thermal_sampler(model.thermal_class);
    const PmfSampler coherent_sampler(model.coherent_class);

    // decide thermal iff P_th(n) > P_coh(n)
    const int n_max = std::max(model.thermal_class.cutoff, model.coherent_class.cutoff);
    std::vector<std::uint8_t> decide_thermal(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n)
        decide_thermal[static_cast<std::size_t>(n)] =
            model.thermal_class.prob(n) > model.coherent_class.prob(n) ? 1 : 0;

    if (through_array) through_array->validate();

    auto blocks = run_shot_blocks<std::uint64_t>(
        shots, seed, workers, [&](const ShotBlock& block, Rng& rng) {
            std::uint64_t errors = 0;
            for (std::uint64_t s = 0; s < block.shot_count; ++s) {
                const bool is_thermal = rng.bernoulli(0.5);
                int n = is_thermal ? thermal_sampler(rng) : coherent_sampler(rng);
                if (through_array) n = detect_shot(n, *through_array, rng).detected_n;
                const bool said_thermal =
                    n <= n_max ? decide_thermal[static_cast<std::size_t>(n)] != 0 : true;
                if (said_thermal != is_thermal) ++errors;
            }
            return errors;
        });

    std::uint64_t errors = 0;
    for (std::uint64_t e : blocks) errors += e;

    DiscriminationResult result;
    result.shots = shots;
    result.delta_n_used = model.delta_n_used;
    result.theory = detail::min_overlap_error(model.thermal_class, model.coherent_class);
    result.error_rate = static_cast<double>(errors) / static_cast<double>(shots);
    result.std_error =
        std::sqrt(result.error_rate * (1.0 - result.error_rate) / static_cast<double>(shots));
    return result;
}

}  // namespace pnrlab
