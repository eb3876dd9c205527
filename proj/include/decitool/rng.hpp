#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace decitool {

/// Portable seeded generator (xoshiro256**). Bit-identical across platforms,
/// which the standard distributions are not, so datasets stay reproducible.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    std::uint64_t operator()() { return next_u64(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

    /// Unbiased integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);
    /// Real in [0, 1) with 53 bits of precision.
    double uniform_real();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Uniform subset of `count` distinct indices from [0, n), in draw order.
    std::vector<std::size_t> choose(std::size_t n, std::size_t count);

    /// Index drawn with probability proportional to weights (not all zero).
    std::size_t weighted_index(std::span<const double> weights);

private:
    std::array<std::uint64_t, 4> s_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent per-item seed derived from a base seed and an index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
/// Seed derived from a base seed and a stream label ("split", "assign", ...).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace decitool
