#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ppcharge/counters.hpp"
#include "ppcharge/protocol.hpp"

// Cloud-side plaintext matching: distance filtering, the three demand
// cases, the weighted matching index, and greedy per-buyer selection with
// in-round seller elimination. All functions are pure over immutable
// inputs and fully deterministic (ties broken by smallest seller id,
// buyers processed in ascending id order).

namespace ppcharge::matching {

enum class DemandMode {
  // A demand neither side flagged removes the pair.
  Strict,
  // A demand nobody has does not block the pair. Default.
  Relaxed,
};

struct DemandPolicy {
  DemandMode mode = DemandMode::Relaxed;
};

struct MatchCandidate {
  std::int64_t seller_id = 0;
  std::int64_t w_index = 0;
};

struct MatchResult {
  std::int64_t buyer_id = 0;
  std::int64_t seller_id = 0;
  std::int64_t w_index = 0;
  int round = 0;

  bool operator==(const MatchResult&) const = default;
};

// Floor of the square root; exact for all non-negative v.
std::int64_t isqrt64(std::int64_t v);

// Squared-integer form of the distance gate: dx^2 + dy^2 < d_max^2,
// equivalent to sqrt(dx^2+dy^2) < d_max by monotonicity and exact in
// integer arithmetic. Strict inequality: equality fails the gate.
bool distance_ok(const protocol::DecryptedPair& pair, std::int64_t d_max);

// Per-demand gate over the decrypted bit sums:
//   sum 2 -> the buyer demand price must cover the seller's (>= 0; a tie
//            counts as covering),
//   sum 1 -> reject (only one side has the demand),
//   sum 0 -> reject under Strict, accept under Relaxed.
// Throws RangeError when a sum is outside {0,1,2}.
bool demand_ok(const std::vector<int>& alpha_sum,
               const std::vector<std::int64_t>& dr_alpha, DemandPolicy policy);

// W = isqrt(dx^2+dy^2)*w_d + dr*w_r + sum_t dr_alpha[t]*w_alpha[t].
// The distance term uses the integer square root so W stays integral.
std::int64_t matching_index(const protocol::DecryptedPair& pair,
                            const protocol::PreferenceWeights& weights);

// Candidate with minimum w_index; ties broken by smallest seller id;
// nullopt when empty.
std::optional<std::int64_t> select_for_buyer(
    const std::vector<MatchCandidate>& candidates);

struct BuyerMeta {
  std::int64_t d_max = 0;
  protocol::PreferenceWeights weights;
};

// Greedy round matching: iterates buyers in ascending id order, filters
// that buyer's pairs by distance then demand among not-yet-matched
// sellers, scores the survivors and takes the minimum, then eliminates
// the chosen seller for the rest of the round. Buyers with no eligible
// seller are simply unmatched. Bumps counters->matchings once per match
// when counters is non-null.
std::vector<MatchResult> run_round_matching(
    const std::vector<std::int64_t>& buyers_in_order,
    const std::vector<protocol::DecryptedPair>& pairs,
    const std::map<std::int64_t, BuyerMeta>& buyer_meta, DemandPolicy policy,
    int round, OpCounters* counters = nullptr);

}  // namespace ppcharge::matching
