#ifndef STOWAVE_RNG_HPP
#define STOWAVE_RNG_HPP

// Counter-based Gaussian generation. Every variate is a pure function of
// (experiment seed, stream, sample id, step id, slot), so results do not depend
// on the order in which samples are evaluated or on the number of workers.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace stowave {

/// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

/// Coordinates identifying one independent block of randomness.
struct SeedCoords {
    std::uint64_t seed = 0;
    std::uint64_t sample = 0;
    std::uint32_t step = 0;
    std::uint32_t stream = 0;

    friend bool operator==(const SeedCoords&, const SeedCoords&) = default;
};

/// Random source for a fixed SeedCoords; `normal_pair(slot)` is reproducible for any slot.
class CounterRng {
public:
    explicit CounterRng(const SeedCoords& coords) : coords_(coords) {}

    [[nodiscard]] std::array<std::uint32_t, 4> block(std::uint32_t slot) const {
        // The stream is folded into the high bits of the sample word so the
        // counter stays 128 bits wide.
        const std::uint64_t sample_word = coords_.sample ^ (std::uint64_t{coords_.stream} << 48);
        return philox4x32({slot, coords_.step, static_cast<std::uint32_t>(sample_word),
                           static_cast<std::uint32_t>(sample_word >> 32)},
                          {static_cast<std::uint32_t>(coords_.seed),
                           static_cast<std::uint32_t>(coords_.seed >> 32)});
    }

    /// Two uniforms in the open interval (0, 1) with 53-bit resolution.
    [[nodiscard]] std::array<double, 2> uniform_pair(std::uint32_t slot) const {
        const auto b = block(slot);
        constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
        auto to_unit = [&](std::uint32_t hi, std::uint32_t lo) {
            const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
            return (static_cast<double>(bits) + 0.5) * scale;
        };
        return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
    }

    /// Two independent standard normals (Box-Muller).
    [[nodiscard]] std::array<double, 2> normal_pair(std::uint32_t slot) const {
        const auto [u1, u2] = uniform_pair(slot);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    [[nodiscard]] const SeedCoords& coords() const noexcept { return coords_; }

private:
    SeedCoords coords_;
};

} // namespace stowave

#endif
