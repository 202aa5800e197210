#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tagshot {

/// Identifies the sampling scheme in run configs. std::mt19937_64's output
/// sequence is fixed by the standard; the bounded-integer and shuffle steps
/// below are ours, so results do not depend on the standard library's
/// distribution implementations.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64/rejection-bounded/partial-fisher-yates/splitmix64-streams";

std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for sub-stream `stream` of run seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform integer in [0, n); n > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// k distinct indices from [0, n), uniformly, in draw order. Requires k <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

}  // namespace tagshot
