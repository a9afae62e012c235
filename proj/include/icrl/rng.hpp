#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace icrl {

// 64-bit FNV-1a. Used for stream-name derivation and prompt hashing.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// SplitMix64 finalizer. Good single-round mixer for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// A single random stream. std::mt19937_64 output is fully specified by the
// standard, and every draw helper below is implemented on raw 64-bit output
// (std::* distributions are not portable across standard libraries), so the
// draw sequence is bit-identical across platforms.
class RngStream {
 public:
  RngStream() : engine_(0) {}
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Exact p = 0 and p = 1 consume no randomness, so degenerate configurations
  // (p_keep in {0,1}) leave the stream untouched.
  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  // Uniform index in [0, n). n == 1 consumes no randomness.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(next_u64()) * n) >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

// Derives independent named streams from one master seed. Every source of
// randomness in a run pulls from its own stream, keyed by name (and optional
// indices), so e.g. the test-evaluation draws can never perturb training.
class SeedSequence {
 public:
  explicit SeedSequence(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }

  std::uint64_t derive(std::string_view name, std::uint64_t a = 0,
                       std::uint64_t b = 0) const {
    std::uint64_t h = splitmix64(master_ ^ fnv1a64(name));
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return h;
  }

  RngStream stream(std::string_view name, std::uint64_t a = 0,
                   std::uint64_t b = 0) const {
    return RngStream(derive(name, a, b));
  }

 private:
  std::uint64_t master_;
};

// Stream names used by the runner. Kept in one place so derivations stay
// stable across versions.
namespace streams {
inline constexpr std::string_view kSplit = "split";
inline constexpr std::string_view kContextBernoulli = "context-bernoulli";
inline constexpr std::string_view kContextSelection = "context-selection";
inline constexpr std::string_view kDownsample = "downsample";
inline constexpr std::string_view kRewardNoise = "reward-noise";
inline constexpr std::string_view kPolicySampling = "policy-sampling";
inline constexpr std::string_view kEvalPolicy = "eval-policy";
}  // namespace streams

}  // namespace icrl
