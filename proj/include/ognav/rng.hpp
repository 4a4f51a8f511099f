#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ognav {

// mt19937_64 is bit-exact across standard libraries; the distribution helpers
// below avoid std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::initializer_list<std::uint64_t> parts);

    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t below(std::uint64_t n);  // [0, n)
    int poisson(double mean);

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);
std::uint64_t hash_text(std::string_view text);

}  // namespace ognav
