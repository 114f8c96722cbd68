#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <utility>
#include <vector>

namespace tabunc {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

// Counter-based generator: the i-th draw is a pure function of (key, i).
// Child streams are derived by hashing a name into the key, so stages can be
// reseeded independently and results do not depend on call interleaving.
// All distributions are implemented here (not via <random>) so sequences are
// identical across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : key_(detail::mix64(seed ^ 0x5DEECE66DULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return detail::mix64(key_ ^ detail::mix64(counter_++)); }

    Rng split(std::string_view name) const noexcept { return from_key(detail::mix64(key_ ^ detail::fnv1a(name))); }
    Rng split(std::uint64_t index) const noexcept {
        return from_key(detail::mix64(key_ + 0xD1B54A32D192ED03ULL * (index + 1)));
    }
    Rng split(std::string_view name, std::uint64_t index) const noexcept { return split(name).split(index); }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

    // Uniform on [0, 1).
    double uniform() noexcept { return double((*this)() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi) noexcept {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return r % n;
    }

    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        return lo + std::int64_t(uniform_index(std::uint64_t(hi - lo) + 1));
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    // Box-Muller; one normal per two uniforms, no cached spare.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) noexcept {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    static Rng from_key(std::uint64_t key) noexcept {
        Rng r;
        r.key_ = key;
        return r;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace tabunc
