#pragma once

#include <cstdint>
#include <random>

namespace stmap {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream addressed by (seed, id0, id1). Streams derived from
// logical indices are independent of thread scheduling, so parallel code
// that assigns one stream per work unit stays reproducible.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t id0 = 0, std::uint64_t id1 = 0)
        : eng_(splitmix64(seed ^ splitmix64(id0 ^ splitmix64(id1 ^ 0x6a09e667f3bcc909ULL)))) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    long poisson(double mean) { return std::poisson_distribution<long>(mean)(eng_); }
    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

}  // namespace stmap
