#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace ghostrnn {

using Engine = std::mt19937_64;

/// [0,1) from the top 53 bits of one draw.
inline double unit_uniform(Engine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle of 0..n-1. The index for slot i is draw % (i+1).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, Engine& engine) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(engine() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace ghostrnn
