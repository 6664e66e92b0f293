#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

#include "pnrlab/rng.hpp"

namespace pnrlab {

/// Partitioned-shot scheme, version 1: shots are split into fixed 65536-shot
/// blocks and block b always draws from derive_stream(seed, b). Workers only
/// decide who runs which block, and per-block results are reduced in block
/// order afterwards, so results are bit-identical for any worker count.
inline constexpr std::uint64_t kShotsPerBlock = 65536;
inline constexpr const char* kPartitionScheme = "fixed-blocks-65536/v1";

struct ShotBlock {
    std::uint64_t index = 0;
    std::uint64_t shot_begin = 0;
    std::uint64_t shot_count = 0;
};

/// Runs `body(block, rng)` over every block of `total_shots`, using up to
/// `workers` threads, and returns the per-block results in block order.
template <typename Result, typename Body>
std::vector<Result> run_shot_blocks(std::uint64_t total_shots, std::uint64_t seed, int workers,
                                    Body&& body) {
    const std::uint64_t n_blocks =
        total_shots == 0 ? 0 : (total_shots + kShotsPerBlock - 1) / kShotsPerBlock;
    std::vector<Result> results(static_cast<std::size_t>(n_blocks));
    if (n_blocks == 0) return results;

    std::atomic<std::uint64_t> next{0};
    auto run = [&]() {
        for (std::uint64_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
            ShotBlock block;
            block.index = b;
            block.shot_begin = b * kShotsPerBlock;
            block.shot_count = std::min(kShotsPerBlock, total_shots - block.shot_begin);
            Rng rng = derive_stream(seed, b);
            results[static_cast<std::size_t>(b)] = body(block, rng);
        }
    };

    const int n_threads = static_cast<int>(
        std::min<std::uint64_t>(n_blocks, static_cast<std::uint64_t>(workers < 1 ? 1 : workers)));
    if (n_threads <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(run);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace pnrlab
