#include "flocode/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flocode {

uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("Rng::uniform: lo must be < hi");
    return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
    // (0,1) open on both sides so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::normal(double mu, double sigma) { return mu + sigma * normal(); }

Rng Rng::fork(uint64_t id) const {
    return Rng(mix64(seed_ ^ mix64(id + 1)));
}

std::string Rng::serialize_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) throw std::runtime_error("Rng::restore_state: malformed state string");
}

}  // namespace flocode
