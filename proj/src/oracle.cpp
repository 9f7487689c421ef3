#include "ppcharge/oracle.hpp"

#include <algorithm>

namespace ppcharge::oracle {

namespace {

using protocol::BuyerRequest;
using protocol::SellerOffer;

const BuyerRequest& buyer_by_id(const protocol::Scenario& s,
                                std::int64_t id) {
  for (const auto& b : s.buyers) {
    if (b.id == id) {
      return b;
    }
  }
  throw paillier::Error("oracle: unknown buyer id");
}

const SellerOffer& seller_by_id(const protocol::Scenario& s,
                                std::int64_t id) {
  for (const auto& o : s.sellers) {
    if (o.id == id) {
      return o;
    }
  }
  throw paillier::Error("oracle: unknown seller id");
}

// Linear-search floor square root; slow and obviously correct.
std::int64_t slow_isqrt(std::int64_t v) {
  std::int64_t s = 0;
  while ((s + 1) * (s + 1) <= v) {
    ++s;
  }
  return s;
}

bool pair_eligible(const BuyerRequest& b, const SellerOffer& o,
                   matching::DemandPolicy policy) {
  std::int64_t dx = b.x - o.x;
  std::int64_t dy = b.y - o.y;
  if (dx * dx + dy * dy >= b.d_max * b.d_max) {
    return false;
  }
  for (std::size_t t = 0; t < b.demands.size(); ++t) {
    int sum = b.demands[t] + o.demands[t];
    if (sum == 1) {
      return false;
    }
    if (sum == 0 && policy.mode == matching::DemandMode::Strict) {
      return false;
    }
    if (sum == 2 && b.demand_prices[t] - o.demand_prices[t] < 0) {
      return false;
    }
  }
  return true;
}

std::int64_t pair_index(const BuyerRequest& b, const SellerOffer& o) {
  std::int64_t dx = b.x - o.x;
  std::int64_t dy = b.y - o.y;
  std::int64_t w = slow_isqrt(dx * dx + dy * dy) * b.weights.w_d +
                   (b.price - o.price) * b.weights.w_r;
  for (std::size_t t = 0; t < b.demands.size(); ++t) {
    w += (b.demand_prices[t] - o.demand_prices[t]) * b.weights.w_alpha[t];
  }
  return w;
}

}  // namespace

std::vector<matching::MatchResult> match_round(
    const protocol::Scenario& scenario,
    const std::vector<std::int64_t>& active_buyers,
    const std::vector<std::int64_t>& active_sellers,
    matching::DemandPolicy policy, int round) {
  std::vector<std::int64_t> buyers = active_buyers;
  std::sort(buyers.begin(), buyers.end());
  std::vector<std::int64_t> pool = active_sellers;

  std::vector<matching::MatchResult> out;
  for (std::int64_t buyer_id : buyers) {
    const BuyerRequest& b = buyer_by_id(scenario, buyer_id);
    bool found = false;
    std::int64_t best_seller = 0;
    std::int64_t best_w = 0;
    for (std::int64_t seller_id : pool) {
      const SellerOffer& o = seller_by_id(scenario, seller_id);
      if (!pair_eligible(b, o, policy)) {
        continue;
      }
      std::int64_t w = pair_index(b, o);
      if (!found || w < best_w || (w == best_w && seller_id < best_seller)) {
        found = true;
        best_seller = seller_id;
        best_w = w;
      }
    }
    if (found) {
      out.push_back(matching::MatchResult{buyer_id, best_seller, best_w,
                                          round});
      pool.erase(std::find(pool.begin(), pool.end(), best_seller));
    }
  }
  return out;
}

RunOutcome match_all(const protocol::Scenario& scenario,
                     matching::DemandPolicy policy, int max_rounds) {
  std::vector<std::int64_t> buyers;
  std::vector<std::int64_t> sellers;
  for (const auto& b : scenario.buyers) {
    buyers.push_back(b.id);
  }
  for (const auto& o : scenario.sellers) {
    sellers.push_back(o.id);
  }
  std::sort(buyers.begin(), buyers.end());
  std::sort(sellers.begin(), sellers.end());

  RunOutcome outcome;
  for (int round = 1; round <= max_rounds; ++round) {
    if (round > 1 && (buyers.empty() || sellers.empty())) {
      break;
    }
    std::vector<matching::MatchResult> matched =
        match_round(scenario, buyers, sellers, policy, round);
    outcome.rounds = round;
    for (const auto& m : matched) {
      buyers.erase(std::find(buyers.begin(), buyers.end(), m.buyer_id));
      sellers.erase(std::find(sellers.begin(), sellers.end(), m.seller_id));
      outcome.matches.push_back(m);
    }
    if (matched.empty()) {
      break;
    }
  }
  outcome.unmatched_buyers = buyers;
  return outcome;
}

}  // namespace ppcharge::oracle
