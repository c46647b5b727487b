#ifndef USSEG_RNG_HPP
#define USSEG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace usseg {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded generator with hand-rolled distributions so that sequences are
// pinned by this file alone, not by the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    uint64_t bits() { return eng_(); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // uniform in {0, ..., n-1}
    size_t index(size_t n) { return static_cast<size_t>(bits() % n); }

    // standard normal, Box-Muller (two bits() draws per call)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent stream keyed off this generator's seed; reproducible
    // regardless of draw order on the parent
    Rng stream(uint64_t key) const { return Rng(splitmix64(seed_ ^ (0x632be59bd9b4e019ULL * (key + 1)))); }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace usseg

#endif
