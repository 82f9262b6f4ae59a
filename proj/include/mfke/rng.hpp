#pragma once

#include <array>
#include <cstdint>

namespace mfke {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Stateless: the output depends only on
/// (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Purpose tags that separate the independent substreams drawn from one seed.
enum class StreamTag : std::uint32_t {
    initial_law = 1,
    diffusion = 2,
    jump = 3,
    environment = 4,
};

/// Counter-based random stream addressed by (seed, index, step, tag).
///
/// Every particle/step pair owns its own stream, so draws never depend on
/// the order in which particles are visited or on the number of threads.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint32_t index, std::uint32_t step, StreamTag tag) noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int cursor_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// One standard normal for (seed, index, step, tag). Equivalent to the first
/// `normal()` of the corresponding CounterStream.
double standard_normal(std::uint64_t seed, std::uint32_t index, std::uint32_t step, StreamTag tag) noexcept;

}  // namespace mfke
