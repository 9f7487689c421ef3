#pragma once

#include <cstdint>
#include <gmpxx.h>

namespace ppcharge {

using BigInt = mpz_class;

// Deterministic random source shared by key generation, encryption
// randomness and scenario generation. Wraps GMP's Mersenne Twister state,
// which produces the same stream for the same seed on every platform.
// Not thread safe; use one instance per thread of work.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(gmp_randinit_mt) {
    state_.seed(static_cast<unsigned long>(seed));
  }

  // Uniform in [0, bound). bound must be > 0.
  BigInt below(const BigInt& bound) { return state_.get_z_range(bound); }

  // Uniform in [lo, hi] (inclusive). Requires lo <= hi.
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    BigInt span = BigInt(hi) - BigInt(lo) + 1;
    return lo + static_cast<std::int64_t>(below(span).get_si());
  }

  // Uniform bit string of exactly `bits` random bits, value in [0, 2^bits).
  BigInt bits(unsigned long n_bits) { return state_.get_z_bits(n_bits); }

  // Bernoulli draw with probability numer/denom.
  bool chance(std::int64_t numer, std::int64_t denom) {
    return below(BigInt(denom)).get_si() < numer;
  }

 private:
  gmp_randclass state_;
};

}  // namespace ppcharge
