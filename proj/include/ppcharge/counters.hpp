#pragma once

#include <cstdint>

namespace ppcharge::matching {

// Per-role operation counts checked against the closed-form cost model.
// Counts only ever grow within a round; the orchestrator resets them when
// a new round opens.
struct OpCounters {
  std::int64_t encryptions = 0;
  std::int64_t he_adds = 0;
  std::int64_t he_subs = 0;
  std::int64_t decryptions = 0;
  std::int64_t matchings = 0;

  std::int64_t he_ops() const { return he_adds + he_subs; }

  OpCounters& operator+=(const OpCounters& other) {
    encryptions += other.encryptions;
    he_adds += other.he_adds;
    he_subs += other.he_subs;
    decryptions += other.decryptions;
    matchings += other.matchings;
    return *this;
  }
};

}  // namespace ppcharge::matching
