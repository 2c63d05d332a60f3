#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qunet {

/// Engine used for every seeded stream in the project.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t hash_string(std::string_view s);

// The std:: distributions are implementation-defined; these are not, so
// seeded streams reproduce across standard libraries.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Inclusive integer range.
int uniform_int(Rng& rng, int lo, int hi);
double standard_normal(Rng& rng);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        const auto j = static_cast<decltype(i)>(uniform_int(rng, 0, static_cast<int>(i)));
        std::swap(first[i], first[j]);
    }
}

}  // namespace qunet
