#pragma once

#include <cstdint>
#include <vector>

#include "ppcharge/matching.hpp"
#include "ppcharge/protocol.hpp"

// Brute-force plaintext reference matcher. Works directly on the scenario
// with no encryption and no code shared with the matching engine or the
// orchestrator; used as ground truth by the verification harness and the
// test suites. Deliberately naive (linear integer square root, full
// rescans) so it stays an independent route.

namespace ppcharge::oracle {

struct RunOutcome {
  std::vector<matching::MatchResult> matches;
  int rounds = 0;
  std::vector<std::int64_t> unmatched_buyers;
};

// One matching round over the given active participants.
std::vector<matching::MatchResult> match_round(
    const protocol::Scenario& scenario,
    const std::vector<std::int64_t>& active_buyers,
    const std::vector<std::int64_t>& active_sellers,
    matching::DemandPolicy policy, int round);

// Full multi-round simulation: matched sellers leave the pool, unmatched
// buyers re-enter, and the loop stops when sellers or buyers are exhausted
// or a round produces no matches.
RunOutcome match_all(const protocol::Scenario& scenario,
                     matching::DemandPolicy policy, int max_rounds = 64);

}  // namespace ppcharge::oracle
