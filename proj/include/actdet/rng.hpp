#pragma once

#include <cstdint>

namespace actdet {

// Counter-based RNG: a stateless hash of (seed, stream, counter) to a
// uniform double in [0,1). Dropout masks and augmentation draws are keyed
// this way so any mask can be re-derived from (seed, step, layer id).
inline uint64_t hash_mix(uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline double counter_uniform(uint64_t seed, uint64_t stream, uint64_t counter) {
    uint64_t h = hash_combine(hash_combine(seed, stream), counter);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Small sequential generator over the same mixing function; used where a
// stream of draws is more natural than a counter (initialization, scenes).
class SeqRng {
  public:
    explicit SeqRng(uint64_t seed) : state_(hash_mix(seed + 0x9e3779b97f4a7c15ULL)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return hash_mix(state_);
    }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
        return lo + static_cast<int64_t>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }
    bool bernoulli(double p) { return uniform() < p; }

  private:
    uint64_t state_;
};

}  // namespace actdet
