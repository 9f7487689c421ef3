#include "ppcharge/scenario_gen.hpp"

#include <cmath>

#include "ppcharge/rng.hpp"

namespace ppcharge::bench {

namespace {

void require(bool cond, const char* what) {
  if (!cond) {
    throw protocol::SchemaError(what);
  }
}

}  // namespace

void validate(const ScenarioConfig& cfg) {
  require(cfg.buyers >= 0 && cfg.sellers >= 0,
          "scenario config: negative participant count");
  require(cfg.k >= 0, "scenario config: negative demand dimension");
  require(cfg.area > 0, "scenario config: area must be positive");
  require(cfg.price_range.lo >= 0 && cfg.price_range.lo <= cfg.price_range.hi,
          "scenario config: empty price range");
  require(cfg.demand_price_range.lo >= 0 &&
              cfg.demand_price_range.lo <= cfg.demand_price_range.hi,
          "scenario config: empty demand price range");
  require(cfg.d_max_range.lo > 0 && cfg.d_max_range.lo <= cfg.d_max_range.hi,
          "scenario config: empty d_max range");
  require(cfg.weight_range.lo >= 0 &&
              cfg.weight_range.lo <= cfg.weight_range.hi,
          "scenario config: empty weight range");
  require(cfg.demand_density >= 0.0 && cfg.demand_density <= 1.0,
          "scenario config: demand density outside [0,1]");
}

protocol::Scenario gen_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  // Integer-threshold form of the density so draws stay platform-stable.
  const std::int64_t density_num =
      std::llround(cfg.demand_density * 1'000'000.0);

  auto draw_demands = [&](std::vector<int>& demands,
                          std::vector<std::int64_t>& prices) {
    demands.resize(cfg.k);
    prices.resize(cfg.k);
    for (int t = 0; t < cfg.k; ++t) {
      demands[t] = rng.chance(density_num, 1'000'000) ? 1 : 0;
      prices[t] = demands[t] == 1 ? rng.range(cfg.demand_price_range.lo,
                                              cfg.demand_price_range.hi)
                                  : 0;
    }
  };

  protocol::Scenario scenario;
  scenario.area_size = cfg.area;
  scenario.k = cfg.k;
  for (int i = 1; i <= cfg.buyers; ++i) {
    protocol::BuyerRequest b;
    b.id = i;
    b.x = rng.range(0, cfg.area);
    b.y = rng.range(0, cfg.area);
    b.price = rng.range(cfg.price_range.lo, cfg.price_range.hi);
    b.d_max = rng.range(cfg.d_max_range.lo, cfg.d_max_range.hi);
    draw_demands(b.demands, b.demand_prices);
    b.weights.w_d = rng.range(cfg.weight_range.lo, cfg.weight_range.hi);
    b.weights.w_r = rng.range(cfg.weight_range.lo, cfg.weight_range.hi);
    b.weights.w_alpha.resize(cfg.k);
    for (int t = 0; t < cfg.k; ++t) {
      b.weights.w_alpha[t] =
          rng.range(cfg.weight_range.lo, cfg.weight_range.hi);
    }
    bool any = b.weights.w_d > 0 || b.weights.w_r > 0;
    for (std::int64_t w : b.weights.w_alpha) {
      any = any || w > 0;
    }
    if (!any) {
      // The weight vector must not be all zero; give distance weight 1.
      b.weights.w_d = std::max<std::int64_t>(1, cfg.weight_range.lo);
    }
    scenario.buyers.push_back(std::move(b));
  }
  for (int j = 1; j <= cfg.sellers; ++j) {
    protocol::SellerOffer s;
    s.id = j;
    s.x = rng.range(0, cfg.area);
    s.y = rng.range(0, cfg.area);
    s.price = rng.range(cfg.price_range.lo, cfg.price_range.hi);
    draw_demands(s.demands, s.demand_prices);
    scenario.sellers.push_back(std::move(s));
  }
  protocol::validate(scenario);
  return scenario;
}

}  // namespace ppcharge::bench
