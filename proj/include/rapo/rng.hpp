#ifndef RAPO_RNG_HPP
#define RAPO_RNG_HPP

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace rapo
{

/**
 * Counter-based generator: output i of stream `key` is mix64(key + (i + 1) * 0x9E3779B97F4A7C15),
 * where mix64 is the SplitMix64 finalizer. A stream is fully described by (key, counter), so
 * independent streams are derived with split() instead of sharing one sequential state.
 *
 * Uniform doubles take the top 53 bits of an output. No std:: distributions are used, so a
 * given seed yields the same draws on every standard library.
 */
class Rng
{
public:
    explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed ^ 0x6A09E667F3BCC909ull)) {}

    static std::uint64_t mix64(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64()
    {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n)
    {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Draw from a discrete distribution by inverse CDF. Weights need not be normalized.
    template <class Derived>
    Eigen::Index categorical(const Eigen::MatrixBase<Derived>& weights)
    {
        const double total = static_cast<double>(weights.sum());
        double u = uniform() * total;
        const Eigen::Index n = weights.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            u -= static_cast<double>(weights(i));
            if (u < 0.0) {
                return i;
            }
        }
        // Rounding left mass at the tail; return the last atom with positive weight.
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            if (weights(i) > 0) {
                return i;
            }
        }
        return n - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

    /// Independent stream keyed by (this stream's key, id). Does not advance this stream.
    Rng split(std::uint64_t id) const
    {
        Rng child;
        child.key_ = mix64(key_ ^ mix64(id + 0xA0761D6478BD642Full));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rapo

#endif
