#pragma once
// Splittable, counter-based random streams.
//
// A stream is identified by (master_seed, path). Its key is a SplitMix64
// hash chain over the path, and the i-th draw is the SplitMix64 finalizer of
// key + i * golden_gamma. Draws therefore depend only on the identity of the
// stream and the draw index, never on scheduling.

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace atc {

namespace detail {

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// UniformRandomBitGenerator over one stream.
class StreamEngine {
public:
    using result_type = std::uint64_t;

    explicit StreamEngine(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::golden_gamma);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

class RandomStream {
public:
    explicit RandomStream(std::uint64_t master_seed = 0, std::vector<std::uint64_t> path = {})
        : master_seed_(master_seed), path_(std::move(path)) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    const std::vector<std::uint64_t>& path() const noexcept { return path_; }

    std::uint64_t key() const noexcept {
        std::uint64_t h = detail::mix64(master_seed_ ^ 0x6a09e667f3bcc909ULL);
        for (std::uint64_t p : path_) h = detail::mix64(h + detail::golden_gamma + detail::mix64(p + 1));
        return h;
    }

    StreamEngine engine() const noexcept { return StreamEngine(key()); }

    friend bool operator==(const RandomStream&, const RandomStream&) = default;

private:
    std::uint64_t master_seed_;
    std::vector<std::uint64_t> path_;
};

inline RandomStream split_stream(const RandomStream& parent, std::uint64_t index) {
    auto path = parent.path();
    path.push_back(index);
    return RandomStream(parent.master_seed(), std::move(path));
}

}  // namespace atc
