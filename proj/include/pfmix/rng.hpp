#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace pfmix {

/// Philox4x64-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3", SC'11). Block i of the stream is
/// philox(counter = {i, 0, 0, 0}, key = {seed, stream}); the first block drawn
/// uses counter 1, which matches numpy.random.Philox(key=[seed, stream]).
///
/// Derived variates:
///   uniform()  = (u64 >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on two uniforms, cosine branch only
///   below(n)   = rejection sampling on u64 to avoid modulo bias
class Rng {
 public:
  using Block = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : key_{seed, stream} {}

  static Block philox(Block counter, std::array<std::uint64_t, 2> key);

  std::uint64_t next_u64();
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t categorical(const std::vector<double>& probs);

  // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
  std::vector<std::size_t> permutation(std::size_t n) { return sample_without_replacement(n, n); }

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t counter_ = 0;
  Block buf_{};
  int pos_ = 4;
};

}  // namespace pfmix
