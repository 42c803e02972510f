#pragma once
/*
 * rng.hpp — seeded random source for deterministic simulations.
 *
 * std::uniform_int_distribution is implementation-defined, so reruns on a
 * different standard library could diverge.  All draws here are derived from
 * raw mt19937_64 output with fixed arithmetic, which keeps scenario replays
 * byte-identical everywhere.
 */

#include <cstdint>
#include <random>
#include <vector>

#include "lnsim/types.hpp"

namespace lnsim {

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw SimError("rng: next_below(0)");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // Uniform double in [0, 1).
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // k distinct indices out of [0, n), in selection order (partial
    // Fisher-Yates over an index vector).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        if (k > n) throw SimError("rng: sample larger than population");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
            std::swap(idx[i], idx[j]);
            out.push_back(idx[i]);
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace lnsim
