#include "ppcharge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ppcharge/rng.hpp"

namespace ppcharge::bench {

namespace {

using Clock = std::chrono::steady_clock;
using paillier::Ciphertext;
using paillier::KeyPair;

double now_diff_ns(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::nano>(b - a).count();
}

struct Samples {
  std::vector<double> all;
  std::vector<double> repeat_medians;
};

// Runs `body` warmup+trials times per repeat, timing each call. The body
// receives a global iteration index so every call sees a distinct input.
Samples time_op(const BenchConfig& cfg,
                const std::function<void(int)>& body) {
  Samples samples;
  int global = 0;
  for (int rep = 0; rep < cfg.repeats; ++rep) {
    std::vector<double> timed;
    timed.reserve(cfg.trials);
    for (int i = 0; i < cfg.warmup + cfg.trials; ++i, ++global) {
      auto t0 = Clock::now();
      body(global);
      auto t1 = Clock::now();
      if (i >= cfg.warmup) {
        timed.push_back(now_diff_ns(t0, t1));
      }
    }
    samples.repeat_medians.push_back(median(timed));
    samples.all.insert(samples.all.end(), timed.begin(), timed.end());
  }
  return samples;
}

TimingRow make_row(const std::string& variant, const std::string& op,
                   const BenchConfig& cfg, const Samples& samples) {
  TimingRow row;
  row.variant = variant;
  row.op = op;
  row.bits = cfg.bits;
  row.trials = cfg.trials;
  row.median_ns = median(samples.repeat_medians);
  double sum = std::accumulate(samples.all.begin(), samples.all.end(), 0.0);
  row.mean_ns = sum / static_cast<double>(samples.all.size());
  double sq = 0.0;
  for (double v : samples.all) {
    sq += (v - row.mean_ns) * (v - row.mean_ns);
  }
  row.stddev_ns = std::sqrt(sq / static_cast<double>(samples.all.size()));
  return row;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) {
    return values[mid];
  }
  return (values[mid - 1] + values[mid]) / 2.0;
}

void validate(const BenchConfig& cfg) {
  if (cfg.bits < 16) {
    throw paillier::RangeError("bench: key size below 16 bits");
  }
  if (!(cfg.trials > cfg.warmup && cfg.warmup >= 0)) {
    throw paillier::RangeError("bench: need trials > warmup >= 0");
  }
  if (cfg.repeats < 1) {
    throw paillier::RangeError("bench: need repeats >= 1");
  }
}

BenchReport bench_crypto(const BenchConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  // Two keypairs of the same size: the random-generator baseline and the
  // n+1 form the optimized variants require.
  KeyPair base = paillier::keygen(cfg.bits, paillier::GMode::RandomG, rng);
  KeyPair opt = paillier::keygen(cfg.bits, paillier::GMode::NPlusOne, rng);

  const int per_repeat = cfg.warmup + cfg.trials;
  const int total = per_repeat * cfg.repeats;

  // Inputs are pre-drawn so the timed region contains only the operation.
  std::vector<BigInt> ms_base, rs_base, ms_opt, rs_opt;
  ms_base.reserve(total);
  for (int i = 0; i < total; ++i) {
    ms_base.push_back(rng.below(base.pk.n()));
    rs_base.push_back(rng.below(base.pk.n() - 1) + 1);
    ms_opt.push_back(rng.below(opt.pk.n()));
    rs_opt.push_back(rng.below(opt.pk.n() - 1) + 1);
  }
  // Reject the (absurdly unlikely) non-units up front.
  for (int i = 0; i < total; ++i) {
    while (gcd(rs_base[i], base.pk.n()) != 1) rs_base[i] += 1;
    while (gcd(rs_opt[i], opt.pk.n()) != 1) rs_opt[i] += 1;
  }

  std::vector<Ciphertext> cts(total);
  std::vector<Ciphertext> cts_opt(total);

  BenchReport report;

  Samples enc_std = time_op(cfg, [&](int i) {
    int idx = i % total;
    cts[idx] = paillier::encrypt_standard(base.pk, ms_base[idx],
                                          rs_base[idx]);
  });
  report.rows.push_back(make_row("standard", "encrypt", cfg, enc_std));

  Samples enc_opt = time_op(cfg, [&](int i) {
    int idx = i % total;
    cts_opt[idx] =
        paillier::encrypt_optimized(opt.pk, ms_opt[idx], rs_opt[idx]);
  });
  report.rows.push_back(make_row("optimized", "encrypt", cfg, enc_opt));

  // The two decryption rows time the same ciphertext set under the same
  // key, so their medians are directly comparable.
  std::vector<BigInt> dec_std_out(total), dec_crt_out(total);
  Samples dec_std = time_op(cfg, [&](int i) {
    int idx = i % total;
    dec_std_out[idx] = paillier::decrypt_standard(base.sk, base.pk, cts[idx]);
  });
  report.rows.push_back(make_row("standard", "decrypt", cfg, dec_std));

  Samples dec_crt = time_op(cfg, [&](int i) {
    int idx = i % total;
    dec_crt_out[idx] = paillier::decrypt_crt(base.sk, base.pk, cts[idx]);
  });
  report.rows.push_back(make_row("crt", "decrypt", cfg, dec_crt));

  // Correctness gate, outside the timed region.
  for (int i = 0; i < total; ++i) {
    if (dec_std_out[i] != ms_base[i] || dec_crt_out[i] != ms_base[i]) {
      throw paillier::CiphertextError(
          "benchmark validation: decryption mismatch");
    }
    if (paillier::decrypt_optimized(opt.sk, opt.pk, cts_opt[i]) !=
        ms_opt[i]) {
      throw paillier::CiphertextError(
          "benchmark validation: optimized round trip mismatch");
    }
  }

  double enc_std_med = report.rows[0].median_ns;
  double enc_opt_med = report.rows[1].median_ns;
  double dec_std_med = report.rows[2].median_ns;
  double dec_crt_med = report.rows[3].median_ns;
  report.encrypt_opt_ratio = enc_opt_med / enc_std_med;
  report.decrypt_crt_ratio = dec_crt_med / dec_std_med;
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "variant,op,bits,trials,mean_ns,median_ns,stddev_ns\n";
  out.setf(std::ios::fixed);
  out.precision(1);
  for (const auto& row : report.rows) {
    out << row.variant << ',' << row.op << ',' << row.bits << ','
        << row.trials << ',' << row.mean_ns << ',' << row.median_ns << ','
        << row.stddev_ns << '\n';
  }
  return out.str();
}

std::string to_text(const BenchReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  for (const auto& row : report.rows) {
    out << row.variant << ' ' << row.op << " @" << row.bits
        << " bits: median " << row.median_ns / 1e6 << " ms, mean "
        << row.mean_ns / 1e6 << " ms, stddev " << row.stddev_ns / 1e6
        << " ms over " << row.trials << " trials\n";
  }
  out << "decrypt ratio crt/standard:        " << report.decrypt_crt_ratio
      << "\n";
  out << "encrypt ratio optimized/standard:  " << report.encrypt_opt_ratio
      << "\n";
  return out.str();
}

}  // namespace ppcharge::bench
