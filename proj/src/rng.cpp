#include "decitool/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace decitool {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    // Lemire's multiply-shift with rejection.
    const auto bound = static_cast<std::uint64_t>(n);
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::size_t>(m >> 64);
}

double Rng::uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> Rng::choose(std::size_t n, std::size_t count) {
    if (count > n) throw std::invalid_argument("choose: count exceeds population");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

std::size_t Rng::weighted_index(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("weighted_index: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("weighted_index: all weights zero");
    const double r = uniform_real() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (r < acc && weights[i] > 0.0) return i;
    }
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) return i;
    }
    return 0;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base ^ splitmix64(index);
    return splitmix64(state);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    // FNV-1a over the label, then mixed with the base.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(base, h);
}

}  // namespace decitool
