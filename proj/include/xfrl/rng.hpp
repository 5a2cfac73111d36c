#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace xfrl {

// Self-contained generators so that every stream is reproducible bit-for-bit
// across platforms and standard library versions.

std::uint64_t splitmix64(std::uint64_t& state);

// Derives an independent substream id from a base seed and up to two tags.
// Used to decouple weight init, batch shuffling and data synthesis so that
// consuming one stream never perturbs another.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b = 0);

// Stream tags.
inline constexpr std::uint64_t kStreamInit   = 0x11;  // per-layer weight init
inline constexpr std::uint64_t kStreamHead   = 0x12;  // head init
inline constexpr std::uint64_t kStreamTarget = 0x21;  // target batch shuffling
inline constexpr std::uint64_t kStreamSource = 0x22;  // source batch shuffling
inline constexpr std::uint64_t kStreamData   = 0x31;  // synthetic sample synthesis

// xoshiro256++ seeded through splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    std::uint64_t below(std::uint64_t n);  // uniform in [0, n), unbiased
    double uniform01();                    // [0, 1)
    double uniform(double lo, double hi);
    double normal();                       // standard normal, Box-Muller
    double gamma(double shape);            // unit scale, shape > 0

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::array<std::uint64_t, 4> s_;
};

}  // namespace xfrl
