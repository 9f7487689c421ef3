#include "ppcharge/matching.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ppcharge::matching {

std::int64_t isqrt64(std::int64_t v) {
  if (v < 0) {
    throw paillier::RangeError("isqrt64: negative argument");
  }
  auto s = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (s > 0 && (s > 3037000499LL || s * s > v)) {
    --s;
  }
  while (s < 3037000499LL && (s + 1) * (s + 1) <= v) {
    ++s;
  }
  return s;
}

bool distance_ok(const protocol::DecryptedPair& pair, std::int64_t d_max) {
  return pair.dx * pair.dx + pair.dy * pair.dy < d_max * d_max;
}

bool demand_ok(const std::vector<int>& alpha_sum,
               const std::vector<std::int64_t>& dr_alpha,
               DemandPolicy policy) {
  if (alpha_sum.size() != dr_alpha.size()) {
    throw paillier::RangeError("demand_ok: vector length mismatch");
  }
  for (std::size_t t = 0; t < alpha_sum.size(); ++t) {
    switch (alpha_sum[t]) {
      case 0:
        if (policy.mode == DemandMode::Strict) {
          return false;
        }
        break;
      case 1:
        return false;
      case 2:
        if (dr_alpha[t] < 0) {
          return false;
        }
        break;
      default:
        throw paillier::RangeError("demand_ok: alpha sum outside {0,1,2}");
    }
  }
  return true;
}

std::int64_t matching_index(const protocol::DecryptedPair& pair,
                            const protocol::PreferenceWeights& weights) {
  std::int64_t dd = isqrt64(pair.dx * pair.dx + pair.dy * pair.dy);
  std::int64_t w = dd * weights.w_d + pair.dr * weights.w_r;
  for (std::size_t t = 0; t < pair.dr_alpha.size(); ++t) {
    w += pair.dr_alpha[t] * weights.w_alpha.at(t);
  }
  return w;
}

std::optional<std::int64_t> select_for_buyer(
    const std::vector<MatchCandidate>& candidates) {
  if (candidates.empty()) {
    return std::nullopt;
  }
  const MatchCandidate* best = &candidates.front();
  for (const auto& cand : candidates) {
    if (cand.w_index < best->w_index ||
        (cand.w_index == best->w_index && cand.seller_id < best->seller_id)) {
      best = &cand;
    }
  }
  return best->seller_id;
}

std::vector<MatchResult> run_round_matching(
    const std::vector<std::int64_t>& buyers_in_order,
    const std::vector<protocol::DecryptedPair>& pairs,
    const std::map<std::int64_t, BuyerMeta>& buyer_meta, DemandPolicy policy,
    int round, OpCounters* counters) {
  std::map<std::int64_t, std::vector<const protocol::DecryptedPair*>>
      by_buyer;
  std::set<std::int64_t> available;
  for (const auto& pair : pairs) {
    by_buyer[pair.buyer_id].push_back(&pair);
    available.insert(pair.seller_id);
  }
  std::vector<std::int64_t> order = buyers_in_order;
  std::sort(order.begin(), order.end());

  std::vector<MatchResult> results;
  for (std::int64_t buyer_id : order) {
    auto it = by_buyer.find(buyer_id);
    if (it == by_buyer.end()) {
      continue;
    }
    const BuyerMeta& meta = buyer_meta.at(buyer_id);
    std::vector<MatchCandidate> candidates;
    std::map<std::int64_t, std::int64_t> w_by_seller;
    for (const protocol::DecryptedPair* pair : it->second) {
      if (available.count(pair->seller_id) == 0) {
        continue;
      }
      if (!distance_ok(*pair, meta.d_max)) {
        continue;
      }
      if (!demand_ok(pair->alpha_sum, pair->dr_alpha, policy)) {
        continue;
      }
      std::int64_t w = matching_index(*pair, meta.weights);
      candidates.push_back(MatchCandidate{pair->seller_id, w});
      w_by_seller[pair->seller_id] = w;
    }
    std::optional<std::int64_t> chosen = select_for_buyer(candidates);
    if (!chosen.has_value()) {
      continue;
    }
    available.erase(*chosen);
    results.push_back(
        MatchResult{buyer_id, *chosen, w_by_seller.at(*chosen), round});
    if (counters != nullptr) {
      ++counters->matchings;
    }
  }
  return results;
}

}  // namespace ppcharge::matching
