#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace flocode {

/// Deterministic random source. All distributions are hand-rolled on top of
/// mt19937_64 so streams are reproducible across standard libraries; normal
/// draws use Box-Muller with no cached spare so the draw count is exact.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    int uniform_int(int lo, int hi);        // inclusive both ends
    double normal();                        // standard normal
    double normal(double mu, double sigma);

    /// Independent child stream; deterministic in (parent seed, id).
    Rng fork(uint64_t id) const;

    uint64_t seed() const { return seed_; }
    std::string serialize_state() const;
    void restore_state(const std::string& state);

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

/// splitmix64 mixing step; used for seed derivation.
uint64_t mix64(uint64_t x);

}  // namespace flocode
