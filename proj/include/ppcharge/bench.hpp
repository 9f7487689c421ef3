#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppcharge/paillier.hpp"

// Crypto micro-benchmarks for the four operations whose relative cost the
// scheme is built around: standard encryption under a random generator,
// parameter-optimized encryption (g = n+1), standard decryption, and
// CRT-accelerated decryption.
//
// Methodology: monotonic clock around single operations, `warmup` discarded
// iterations then `trials` timed iterations per outer repeat, median taken
// over the per-repeat medians, mean/stddev over all timed samples.
// Plaintexts are uniform in [0, n) so the random-generator baseline pays a
// full-size g^m exponentiation; encryption randomness is pre-drawn outside
// the timed region so both encryption variants time the same r^n work and
// differ only in the g^m-vs-(1+mn) step. Correctness of every decryption
// is asserted after the timed region. Single-threaded.

namespace ppcharge::bench {

struct BenchConfig {
  unsigned bits = 2048;
  int trials = 30;    // timed iterations per repeat
  int warmup = 5;     // discarded iterations per repeat
  int repeats = 50;   // outer repetitions for the median-of-medians
  std::uint64_t seed = 1;
};

void validate(const BenchConfig& cfg);

struct TimingRow {
  std::string variant;  // standard | optimized | crt
  std::string op;       // encrypt | decrypt
  unsigned bits = 0;
  int trials = 0;
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double stddev_ns = 0.0;
};

struct BenchReport {
  std::vector<TimingRow> rows;
  // median(decrypt crt) / median(decrypt standard)
  double decrypt_crt_ratio = 0.0;
  // median(encrypt optimized) / median(encrypt standard, random g)
  double encrypt_opt_ratio = 0.0;
};

BenchReport bench_crypto(const BenchConfig& cfg);

// Fixed column order: variant,op,bits,trials,mean_ns,median_ns,stddev_ns
std::string to_csv(const BenchReport& report);
std::string to_text(const BenchReport& report);

double median(std::vector<double> values);

}  // namespace ppcharge::bench
