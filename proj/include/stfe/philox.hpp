#pragma once

#include <array>
#include <cstdint>

namespace stfe {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
///
/// Pure function of (counter, key); no internal state.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter generate(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

/// Map two 32-bit words to a double in the open interval (0, 1) with 52 random
/// bits; (b + 1/2) 2^-52 stays strictly below 1 after rounding.
constexpr double open_unit_interval(std::uint32_t hi, std::uint32_t lo) noexcept
{
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 20) ^ (static_cast<std::uint64_t>(lo) >> 12);
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

}  // namespace stfe
