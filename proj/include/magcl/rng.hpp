#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace magcl {

/// Counter-based generator: the n-th output (n = 1, 2, ...) is
/// splitmix64_mix(key + n * 0x9E3779B97F4A7C15). Streams are therefore
/// reproducible from (key, counter) alone, and independent substreams are
/// obtained by re-keying with a label hash.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    result_type operator()() { return next(); }

    std::uint64_t next() {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in the inclusive range [lo, hi], unbiased (rejection).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next());
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t r;
        do {
            r = next();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Independent stream keyed by a label; does not advance this stream.
    Rng substream(std::string_view label) const { return Rng(mix(key_ ^ hash_label(label))); }

    /// Independent stream keyed by an integer (e.g. epoch or run index).
    Rng substream(std::uint64_t index) const { return Rng(mix(key_ ^ mix(index + kGamma))); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// FNV-1a, used only to turn stream labels into keys.
    static constexpr std::uint64_t hash_label(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace magcl
