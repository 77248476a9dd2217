#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace dedpo {

// Counter-based splittable random stream.  Every draw is a stateless hash of
// (key, counter), so a stream can be forked into independent lanes by mixing a
// lane tag into the key.  This keeps all sampling reproducible from a single
// root seed no matter how components interleave their draws, and lets data
// generation, training and evaluation each own a private lane.
class RngStream {
 public:
  RngStream() : key_(0), counter_(0) {}

  static RngStream root(std::uint64_t seed) {
    return RngStream(mix(seed + 0x9e3779b97f4a7c15ull));
  }

  // Derive an independent stream.  Splitting is a pure function of the parent
  // key and the tag; it does not consume or disturb the parent's counter.
  RngStream split(std::uint64_t tag) const {
    return RngStream(mix(key_ ^ mix(tag + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe to feed into log().
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.  Two uniforms per draw; no cached spare,
  // so the draw count per call is fixed and replay stays simple.
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double a = 2.0 * std::numbers::pi * uniform();
    return r * std::cos(a);
  }

  // Uniform integer in [0, n) by 128-bit multiply; n must be positive.
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // First k entries of a uniformly random permutation of {0,..,n-1}
  // (partial Fisher-Yates), as indices.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(v.size() - i));
      std::swap(v[i], v[j]);
    }
  }

 private:
  explicit RngStream(std::uint64_t key) : key_(key), counter_(0) {}

  // SplitMix64 finalizer; bijective on 64-bit words with full avalanche.
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace dedpo
