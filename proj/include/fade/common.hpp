#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fade {

// Error taxonomy mirrors the CLI exit codes: usage=1, data=2, numeric=3.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level();                 // from FADE_LOG, cached
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

// Deterministic PRNG. std::normal_distribution & friends are
// implementation-defined, so all sampling goes through this wrapper.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; one value per call, cached pair discarded for simplicity
    double normal(double mean = 0.0, double stddev = 1.0);

    // uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // derive an independent stream, e.g. per module or per frame
    Rng fork(std::uint64_t salt) const {
        Rng r(state_ ^ (salt * 0xd6e8feb86659fd93ull + 0x2545f4914f6cdd1dull));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

}  // namespace fade
