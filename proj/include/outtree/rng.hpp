#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace outtree {

/// Portable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. All variates are derived here rather than through the
/// <random> distributions, whose algorithms differ between standard
/// libraries, so a seed reproduces the same draws on every platform.
///
/// Stream splitting: `substream(key)` seeds a fresh engine with
/// splitmix64(seed ^ splitmix64(key + 1)). Substreams depend only on the
/// parent seed and the key, never on how much of the parent has been
/// consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }
    Rng substream(std::uint64_t key) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    /// Uniform integer in [0, n); unbiased (rejection sampling).
    std::size_t index(std::size_t n);
    /// Standard normal (Marsaglia polar method, no cached spare).
    double normal();
    /// Gamma(shape, 1) via Marsaglia and Tsang.
    double gamma(double shape);
    /// Draw an index with probability proportional to `weights`.
    std::size_t categorical(std::span<const double> weights);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace outtree
