// Acceptance suite: runs every gate criterion end to end and prints one
// pass/fail line per criterion. Exit code 0 only if all pass.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ppcharge/bench.hpp"
#include "ppcharge/oracle.hpp"
#include "ppcharge/orchestrator.hpp"
#include "ppcharge/paillier.hpp"
#include "ppcharge/scenario_gen.hpp"

using namespace ppcharge;
using paillier::Ciphertext;
using paillier::GMode;
using paillier::KeyPair;

namespace {

constexpr double kDecryptCrtRatioGate = 0.45;  // CRT "about 1/3", widened
constexpr double kEncryptOptRatioGate = 0.75;  // optimized "1/3 faster"

struct Criterion {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Criterion> g_results;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void report(int id, const std::string& name, bool pass,
            const std::string& detail, double seconds) {
  g_results.push_back(Criterion{id, name, pass, detail, seconds});
  std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", pass ? "PASS" : "FAIL",
              id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
}

template <typename Fn>
void run_criterion(int id, const std::string& name, Fn&& fn) {
  Timer timer;
  try {
    auto [pass, detail] = fn();
    report(id, name, pass, detail, timer.seconds());
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what(),
           timer.seconds());
  }
}

using Outcome = std::pair<bool, std::string>;

// --------------------------------------------------------------------------
// 1. Round-trip suite over every valid encrypt/decrypt combination.

Outcome criterion_roundtrip() {
  Rng rng(1001);
  long combos = 0;
  long checks = 0;

  auto exercise = [&](const KeyPair& kp, int plaintexts,
                      bool exhaustive) -> bool {
    std::vector<BigInt> ms;
    if (exhaustive) {
      for (BigInt m = 0; m < kp.pk.n(); ++m) ms.push_back(m);
    } else {
      for (int i = 0; i < plaintexts; ++i) ms.push_back(rng.below(kp.pk.n()));
    }
    bool n_plus_one = kp.pk.g_mode() == GMode::NPlusOne;
    for (const BigInt& m : ms) {
      std::vector<Ciphertext> cts{paillier::encrypt_standard(kp.pk, m, rng)};
      if (n_plus_one) {
        cts.push_back(paillier::encrypt_optimized(kp.pk, m, rng));
      }
      for (const Ciphertext& ct : cts) {
        if (paillier::decrypt_standard(kp.sk, kp.pk, ct) != m) return false;
        if (paillier::decrypt_crt(kp.sk, kp.pk, ct) != m) return false;
        if (n_plus_one &&
            paillier::decrypt_optimized(kp.sk, kp.pk, ct) != m) {
          return false;
        }
        checks += n_plus_one ? 3 : 2;
      }
    }
    combos += n_plus_one ? 6 : 2;
    return true;
  };

  // The hand-verified oracle key, exhaustive over all of Z_35.
  if (!exercise(paillier::keypair_from_primes(5, 7, GMode::NPlusOne), 0,
                true)) {
    return {false, "small oracle key failed"};
  }
  for (unsigned bits : {32u, 512u, 1024u}) {
    for (GMode mode : {GMode::RandomG, GMode::NPlusOne}) {
      if (!exercise(paillier::keygen(bits, mode, rng), 1000, false)) {
        return {false, "failure at " + std::to_string(bits) + " bits"};
      }
    }
  }
  return {true, std::to_string(combos) + " combinations, " +
                    std::to_string(checks) + " exact round trips"};
}

// --------------------------------------------------------------------------
// 2. Decryption-variant equivalence on random ciphertexts.

Outcome criterion_variant_equivalence() {
  Rng rng(2002);
  long checked = 0;
  for (unsigned bits : {32u, 512u, 1024u}) {
    KeyPair kp = paillier::keygen(bits, GMode::NPlusOne, rng);
    for (int i = 0; i < 500; ++i) {
      BigInt m = rng.below(kp.pk.n());
      Ciphertext ct = i % 2 == 0
                          ? paillier::encrypt_standard(kp.pk, m, rng)
                          : paillier::encrypt_optimized(kp.pk, m, rng);
      BigInt a = paillier::decrypt_standard(kp.sk, kp.pk, ct);
      BigInt b = paillier::decrypt_optimized(kp.sk, kp.pk, ct);
      BigInt c = paillier::decrypt_crt(kp.sk, kp.pk, ct);
      if (a != b || b != c || a != m) {
        return {false, "variant mismatch at " + std::to_string(bits) +
                           " bits, iteration " + std::to_string(i)};
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " ciphertexts, exact equality"};
}

// --------------------------------------------------------------------------
// 3. Homomorphism: sums mod n, signed differences.

Outcome criterion_homomorphism() {
  Rng rng(3003);
  KeyPair kp = paillier::keygen(512, GMode::RandomG, rng);
  const BigInt n = kp.pk.n();
  for (int i = 0; i < 1000; ++i) {
    BigInt a = rng.below(n);
    BigInt b = rng.below(n);
    Ciphertext sum = paillier::he_add(
        kp.pk, paillier::encrypt_standard(kp.pk, a, rng),
        paillier::encrypt_standard(kp.pk, b, rng));
    if (paillier::decrypt_crt(kp.sk, kp.pk, sum) != (a + b) % n) {
      return {false, "he_add mismatch at iteration " + std::to_string(i)};
    }
    BigInt c = rng.below(n / 4);
    BigInt d = rng.below(n / 4);
    Ciphertext diff = paillier::he_sub(
        kp.pk, paillier::encrypt_standard(kp.pk, c, rng),
        paillier::encrypt_standard(kp.pk, d, rng));
    BigInt got = paillier::decode_signed(
        n, paillier::decrypt_crt(kp.sk, kp.pk, diff));
    if (got != c - d) {
      return {false, "he_sub mismatch at iteration " + std::to_string(i)};
    }
  }
  return {true, "1000 additive and 1000 subtractive pairs, exact"};
}

// --------------------------------------------------------------------------
// 4 + 5. Benchmark ratio gates at 2048 bits.

bench::BenchReport run_gate_bench() {
  bench::BenchConfig cfg;
  cfg.bits = 2048;
  cfg.trials = 200;
  cfg.warmup = 20;
  cfg.repeats = 1;
  cfg.seed = 4004;
  return bench::bench_crypto(cfg);
}

Outcome criterion_fig2(const bench::BenchReport& report) {
  // Sanity of the timing rows themselves (trials = 200 >= 100).
  for (const auto& row : report.rows) {
    if (!(row.mean_ns > 0.0 && row.median_ns > 0.0 &&
          row.stddev_ns < row.mean_ns)) {
      return {false, "timing sanity failed for " + row.variant + " " +
                         row.op};
    }
  }
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);
  detail << "median crt/standard = " << report.decrypt_crt_ratio
         << ", gate " << kDecryptCrtRatioGate;
  return {report.decrypt_crt_ratio <= kDecryptCrtRatioGate, detail.str()};
}

Outcome criterion_fig3(const bench::BenchReport& report) {
  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(3);
  detail << "median optimized/standard = " << report.encrypt_opt_ratio
         << ", gate " << kEncryptOptRatioGate;
  return {report.encrypt_opt_ratio <= kEncryptOptRatioGate, detail.str()};
}

// --------------------------------------------------------------------------
// 6 + 8b + 8d + 9. Randomized scenario sweep at 512-bit round keys.

struct SweepTally {
  long runs = 0;
  long matches = 0;
  long divergences = 0;
  long fidelity_failures = 0;
  long proxy_decryptions = 0;
  long wire_violations = 0;
  std::string first_issue;
};

SweepTally run_matching_sweep() {
  SweepTally tally;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng shape(seed * 7919);
    bench::ScenarioConfig cfg;
    cfg.buyers = static_cast<int>(shape.range(0, 10));
    cfg.sellers = static_cast<int>(shape.range(0, 10));
    cfg.k = static_cast<int>(shape.range(0, 4));
    cfg.seed = seed;
    protocol::Scenario scenario = bench::gen_scenario(cfg);
    for (matching::DemandMode mode : {matching::DemandMode::Relaxed,
                                      matching::DemandMode::Strict}) {
      orchestrator::ProtocolConfig pcfg;
      pcfg.key_bits = 512;
      pcfg.policy = matching::DemandPolicy{mode};
      pcfg.seed = seed * 2 + (mode == matching::DemandMode::Relaxed ? 0 : 1);
      orchestrator::ProtocolRun run(scenario, pcfg);
      orchestrator::RunReport report = run.run_all();
      oracle::RunOutcome expected = oracle::match_all(scenario, pcfg.policy);
      ++tally.runs;
      tally.matches += static_cast<long>(report.matches.size());
      if (report.matches != expected.matches ||
          report.unmatched_buyers != expected.unmatched_buyers) {
        ++tally.divergences;
        if (tally.first_issue.empty()) {
          tally.first_issue = "divergence at seed " + std::to_string(seed);
        }
      }
      orchestrator::AuditReport invariants =
          orchestrator::check_run_invariants(run);
      if (!invariants.ok()) {
        ++tally.fidelity_failures;
        if (tally.first_issue.empty()) {
          tally.first_issue = "seed " + std::to_string(seed) + ": " +
                              invariants.violations.front();
        }
      }
      for (const auto& round : report.rounds) {
        tally.proxy_decryptions += round.counters.proxy.decryptions;
      }
      orchestrator::AuditReport wire =
          orchestrator::audit_message_log(scenario, run.log());
      tally.wire_violations += static_cast<long>(wire.violations.size());
    }
  }
  return tally;
}

Outcome criterion_oracle_equivalence(const SweepTally& tally) {
  std::string detail = std::to_string(tally.runs) + " runs, " +
                       std::to_string(tally.matches) + " matches, " +
                       std::to_string(tally.divergences) + " divergences";
  if (!tally.first_issue.empty()) {
    detail += "; " + tally.first_issue;
  }
  return {tally.divergences == 0, detail};
}

Outcome criterion_return_fidelity(const SweepTally& tally) {
  return {tally.fidelity_failures == 0,
          std::to_string(tally.matches) +
              " matches checked, counterparty data exact, sk chunked"};
}

// --------------------------------------------------------------------------
// 7. Cost-model counter sweep.

Outcome criterion_cost_model() {
  long rounds_checked = 0;
  for (int i : {0, 1, 2, 5}) {
    for (int j : {0, 1, 2, 5}) {
      for (int k : {0, 1, 3}) {
        bench::ScenarioConfig cfg;
        cfg.buyers = i;
        cfg.sellers = j;
        cfg.k = k;
        cfg.seed = 100 + static_cast<std::uint64_t>(i * 16 + j * 4 + k);
        protocol::Scenario scenario = bench::gen_scenario(cfg);
        orchestrator::ProtocolConfig pcfg;
        pcfg.key_bits = 128;
        pcfg.seed = cfg.seed;
        orchestrator::ProtocolRun run(scenario, pcfg);
        run.run_all();
        for (const auto& r : run.history()) {
          const std::int64_t ii = r.active_buyers, jj = r.active_sellers,
                             kk = r.k;
          ++rounds_checked;
          if (r.counters.proxy.he_ops() != ii * jj * (2 * kk + 3)) {
            return {false, "proxy formula failed at I=" + std::to_string(i) +
                               " J=" + std::to_string(j) +
                               " k=" + std::to_string(k)};
          }
          if (r.counters.cloud.decryptions !=
              ii * jj * (2 * kk + 3) + ii * (3 + kk)) {
            return {false, "cloud formula failed at I=" + std::to_string(i) +
                               " J=" + std::to_string(j) +
                               " k=" + std::to_string(k)};
          }
          if (r.counters.entities().encryptions !=
              ii * (6 + 3 * kk) + jj * (3 + 2 * kk)) {
            return {false,
                    "entity formula failed at I=" + std::to_string(i) +
                        " J=" + std::to_string(j) + " k=" + std::to_string(k)};
          }
        }
      }
    }
  }
  return {true, "48 sweep points, " + std::to_string(rounds_checked) +
                    " rounds, all formulas exact"};
}

// --------------------------------------------------------------------------
// 8. Security behaviors.

Outcome criterion_security(const SweepTally& tally) {
  Rng rng(8008);
  // (a) Probabilistic encryption: one plaintext, pairwise distinct.
  KeyPair kp = paillier::keygen(512, GMode::RandomG, rng);
  std::set<BigInt> seen;
  for (int i = 0; i < 100; ++i) {
    seen.insert(paillier::encrypt_standard(kp.pk, 12345, rng).c);
  }
  if (seen.size() != 100) {
    return {false, "(a) repeated ciphertext under fresh randomness"};
  }
  // (b) Proxy never decrypts, over the whole sweep.
  if (tally.proxy_decryptions != 0) {
    return {false, "(b) proxy decryption counter nonzero"};
  }
  // (c) Cross-round ciphertexts always rejected.
  bench::ScenarioConfig cfg;
  cfg.buyers = 2;
  cfg.sellers = 2;
  cfg.k = 1;
  cfg.seed = 88;
  protocol::Scenario scenario = bench::gen_scenario(cfg);
  orchestrator::ProtocolConfig pcfg;
  pcfg.key_bits = 512;
  pcfg.seed = 88;
  orchestrator::ProtocolRun run(scenario, pcfg);
  if (!run.open_round()) {
    return {false, "(c) round failed to open"};
  }
  protocol::EncryptedProfile stale =
      protocol::encrypt_buyer(run.round_pk(), scenario.buyers[0], rng);
  run.submit_all();
  run.proxy_phase();
  run.cloud_phase();
  run.result_return();
  run.close_round();
  bool rejected = false;
  if (run.open_round()) {
    try {
      run.register_with_proxy(stale);
    } catch (const paillier::KeyMismatchError&) {
      rejected = true;
    }
  }
  if (!rejected) {
    return {false, "(c) stale-round ciphertext was accepted"};
  }
  // (d) No plaintext profile value on the wire outside return delivery.
  if (tally.wire_violations != 0) {
    return {false, "(d) message-log audit found plaintext on the wire"};
  }
  return {true,
          "(a) 100 distinct ciphertexts; (b) proxy decryptions 0; "
          "(c) stale key rejected; (d) wire audit clean"};
}

}  // namespace

int main() {
  std::printf("acceptance suite: privacy-preserving charging-pile matching\n");

  run_criterion(1, "crypto round-trip suite", criterion_roundtrip);
  run_criterion(2, "decryption variant equivalence",
                criterion_variant_equivalence);
  run_criterion(3, "homomorphism properties", criterion_homomorphism);

  {
    Timer timer;
    bench::BenchReport gate;
    bool bench_ok = true;
    std::string bench_err;
    try {
      gate = run_gate_bench();
    } catch (const std::exception& e) {
      bench_ok = false;
      bench_err = e.what();
    }
    double split = timer.seconds() / 2.0;
    if (bench_ok) {
      auto [p4, d4] = criterion_fig2(gate);
      report(4, "crt decryption ratio at 2048 bits", p4, d4, split);
      auto [p5, d5] = criterion_fig3(gate);
      report(5, "optimized encryption ratio at 2048 bits", p5, d5, split);
    } else {
      report(4, "crt decryption ratio at 2048 bits", false, bench_err, split);
      report(5, "optimized encryption ratio at 2048 bits", false, bench_err,
             split);
    }
  }

  {
    Timer timer;
    SweepTally tally;
    bool sweep_ok = true;
    std::string sweep_err;
    try {
      tally = run_matching_sweep();
    } catch (const std::exception& e) {
      sweep_ok = false;
      sweep_err = e.what();
    }
    double elapsed = timer.seconds();
    if (sweep_ok) {
      auto [p6, d6] = criterion_oracle_equivalence(tally);
      report(6, "matching oracle equivalence", p6, d6, elapsed);
      run_criterion(7, "cost-model counter formulas", criterion_cost_model);
      auto [p8, d8] = criterion_security(tally);
      report(8, "protocol security behaviors", p8, d8, 0.0);
      auto [p9, d9] = criterion_return_fidelity(tally);
      report(9, "result-return fidelity", p9, d9, 0.0);
    } else {
      report(6, "matching oracle equivalence", false, sweep_err, elapsed);
      run_criterion(7, "cost-model counter formulas", criterion_cost_model);
      report(8, "protocol security behaviors", false, sweep_err, 0.0);
      report(9, "result-return fidelity", false, sweep_err, 0.0);
    }
  }

  int failed = 0;
  for (const auto& c : g_results) {
    failed += c.pass ? 0 : 1;
  }
  std::printf("acceptance: %zu/%zu criteria passed\n",
              g_results.size() - failed, g_results.size());
  return failed == 0 ? 0 : 1;
}
