#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace csrlab {

// Platform-stable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every distribution here is written out
// explicitly because the std:: distributions are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    double normal();

    // Knuth's multiplication method; fine for the small rates used here.
    int poisson(double lambda);

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

inline std::uint64_t derive_seed(std::uint64_t base) { return base; }

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t next, Rest... rest) {
    return derive_seed(mix_seed(base, next), static_cast<std::uint64_t>(rest)...);
}

} // namespace csrlab
