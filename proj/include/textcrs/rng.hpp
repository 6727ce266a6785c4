#pragma once

#include <cstdint>
#include <vector>

namespace textcrs {

// Counter-based random stream: every draw is a pure function of (key, counter),
// and substreams are derived by mixing a salt into the key. This makes noise
// sampling replayable per (instance, sample, row) no matter how work is split
// across threads.
class RngStream {
 public:
  explicit RngStream(uint64_t key) : key_(key) {}

  RngStream fork(uint64_t salt) const {
    return RngStream(mix(key_ ^ 0x8e58'1f83'5e4a'ac8dULL, splitmix(salt)));
  }

  uint64_t next_u64() { return mix(key_, counter_++); }

  // Uniform in the open interval (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_gaussian();  // standard normal via inverse-CDF (bounds.cpp)

  // Unbiased uniform in [0, bound).
  uint64_t next_below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t splitmix(uint64_t z) {
    z += 0x9e37'79b9'7f4a'7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
    return z ^ (z >> 31);
  }
  static uint64_t mix(uint64_t key, uint64_t ctr) {
    uint64_t z = key + 0x9e37'79b9'7f4a'7c15ULL * (ctr + 1);
    z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace textcrs
