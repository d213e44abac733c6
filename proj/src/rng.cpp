#include "pfmix/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "pfmix/common.hpp"

namespace pfmix {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(prod >> 64);
  lo = static_cast<std::uint64_t>(prod);
}

}  // namespace

Rng::Block Rng::philox(Block c, std::array<std::uint64_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::uint64_t Rng::next_u64() {
  if (pos_ == 4) {
    ++counter_;
    buf_ = philox({counter_, 0, 0, 0}, key_);
    pos_ = 0;
  }
  return buf_[static_cast<std::size_t>(pos_++)];
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw UsageError("Rng::below: n must be positive");
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n + 1) % n;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v <= limit) return v % n;
  }
}

std::size_t Rng::categorical(const std::vector<double>& probs) {
  const double u = uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can leave acc a hair below 1; fall back to the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  throw UsageError("Rng::categorical: no positive probability");
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw UsageError("Rng::sample_without_replacement: k > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace pfmix
