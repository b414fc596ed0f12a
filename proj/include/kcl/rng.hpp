#ifndef KCL_RNG_HPP
#define KCL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace kcl {

/// SplitMix64 generator (Steele, Lea & Flood; Vigna's public-domain reference).
///
/// Chosen because it has a single 64-bit word of state, accepts any seed
/// including zero, and is trivial to reimplement in another language from
/// the three-line mixing function below. Reference values, seed 0:
///   0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
/// seed 1:
///   0x910A2DEC89025CC1, 0xBEEB8DA1658EEC67, 0xF893A2EEFB32555E
///
/// Every derived draw (doubles, bounded ints, gaussians, shuffles) is
/// defined exactly here so that runs reproduce bit-for-bit across
/// implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1): top 53 bits scaled by 2^-53.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo,hi): lo + (hi-lo)*next_double().
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0,n) via the multiply-high map (u*n)>>64.
    /// Single draw, no rejection; the residual bias (< n/2^64) is
    /// irrelevant here, determinism is what matters.
    std::uint64_t next_below(std::uint64_t n) {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller, cosine branch only. Draws exactly
    /// two uniforms per call; u1 is floored at 1e-300 before the log.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1 > 1e-300 ? u1 : 1e-300));
        return r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    /// In-place Fisher-Yates, descending index, j = next_below(i+1).
    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Derives an independent stream seed from a base seed and a list of tag
/// words (e.g. {purpose, task_id, epoch}). Defined as: s = first output of
/// SplitMix64(base); then for each word w, s = first output of
/// SplitMix64(s ^ w). Keeps sibling streams (per task, per epoch)
/// decorrelated while staying trivially portable.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = SplitMix64(base).next_u64();
    for (std::uint64_t w : words) {
        s = SplitMix64(s ^ w).next_u64();
    }
    return s;
}

/// Stream purpose tags used with derive_seed. Fixed constants, part of the
/// reproducibility contract.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
}  // namespace stream

}  // namespace kcl

#endif  // KCL_RNG_HPP
