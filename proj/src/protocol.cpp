#include "ppcharge/protocol.hpp"

#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace ppcharge::protocol {

namespace {

using paillier::Ciphertext;
using paillier::PublicKey;

// These bounds cap every matching-index term at ~10^15 and the sum (with
// k <= 64 dimensions) at ~10^17, safely inside int64 even for adversarial
// scenario files.
constexpr std::int64_t kMaxCoordinate = 10'000'000;  // 10,000 km
constexpr std::int64_t kMaxPrice = 1'000'000'000;    // minor units
constexpr std::int64_t kMaxWeight = 1'000'000;       // 10^3 at scale 10^3
constexpr int kMaxDemands = 64;

void require(bool cond, const std::string& what) {
  if (!cond) {
    throw SchemaError(what);
  }
}

void check_demand_vectors(const std::vector<int>& demands,
                          const std::vector<std::int64_t>& demand_prices,
                          int k, const std::string& who) {
  require(static_cast<int>(demands.size()) == k,
          who + ": demands length != k");
  require(static_cast<int>(demand_prices.size()) == k,
          who + ": demand_prices length != k");
  for (int t = 0; t < k; ++t) {
    require(demands[t] == 0 || demands[t] == 1,
            who + ": demand bit outside {0,1}");
    require(demand_prices[t] >= 0 && demand_prices[t] <= kMaxPrice,
            who + ": demand price out of range");
    if (demands[t] == 0) {
      require(demand_prices[t] == 0,
              who + ": demand price set where the demand bit is 0");
    }
  }
}

Ciphertext enc(const PublicKey& pk, std::int64_t value, Rng& rng,
               matching::OpCounters* counters) {
  BigInt m(static_cast<long>(value));
  if (m < 0 || 2 * m >= pk.n()) {
    throw paillier::RangeError("profile field exceeds plaintext half-range");
  }
  Ciphertext ct = paillier::encrypt_standard(pk, m, rng);
  if (counters != nullptr) {
    ++counters->encryptions;
  }
  return ct;
}

std::size_t bytes_of(const Ciphertext& ct) {
  return paillier::to_bytes(ct).size();
}

}  // namespace

std::size_t EncryptedProfile::ciphertext_count() const {
  std::size_t count = 3 + ct_demands.size() + ct_demand_prices.size() +
                      ct_weights.size();
  if (ct_dmax.has_value()) {
    ++count;
  }
  return count;
}

std::size_t EncryptedProfile::wire_bytes() const {
  std::size_t total = 8;  // id
  total += bytes_of(ct_x) + bytes_of(ct_y) + bytes_of(ct_price);
  if (ct_dmax.has_value()) {
    total += bytes_of(*ct_dmax);
  }
  for (const auto& ct : ct_demands) total += bytes_of(ct);
  for (const auto& ct : ct_demand_prices) total += bytes_of(ct);
  for (const auto& ct : ct_weights) total += bytes_of(ct);
  return total;
}

std::size_t PairRecord::wire_bytes() const {
  std::size_t total = 16;  // buyer and seller ids
  total += bytes_of(ct_dx) + bytes_of(ct_dy) + bytes_of(ct_dr);
  for (const auto& ct : ct_alpha_sum) total += bytes_of(ct);
  for (const auto& ct : ct_dr_alpha) total += bytes_of(ct);
  return total;
}

void validate(const BuyerRequest& req, std::int64_t area_size, int k) {
  require(req.x >= 0 && req.x <= area_size, "buyer: x outside the area");
  require(req.y >= 0 && req.y <= area_size, "buyer: y outside the area");
  require(req.price >= 0 && req.price <= kMaxPrice,
          "buyer: price out of range");
  require(req.d_max > 0 && req.d_max <= kMaxCoordinate,
          "buyer: d_max must be positive");
  check_demand_vectors(req.demands, req.demand_prices, k, "buyer");
  require(static_cast<int>(req.weights.w_alpha.size()) == k,
          "buyer: w_alpha length != k");
  bool any_positive = req.weights.w_d > 0 || req.weights.w_r > 0;
  require(req.weights.w_d >= 0 && req.weights.w_d <= kMaxWeight,
          "buyer: w_d out of range");
  require(req.weights.w_r >= 0 && req.weights.w_r <= kMaxWeight,
          "buyer: w_r out of range");
  for (std::int64_t w : req.weights.w_alpha) {
    require(w >= 0 && w <= kMaxWeight, "buyer: w_alpha out of range");
    any_positive = any_positive || w > 0;
  }
  require(any_positive, "buyer: at least one weight must be positive");
}

void validate(const SellerOffer& offer, std::int64_t area_size, int k) {
  require(offer.x >= 0 && offer.x <= area_size, "seller: x outside the area");
  require(offer.y >= 0 && offer.y <= area_size, "seller: y outside the area");
  require(offer.price >= 0 && offer.price <= kMaxPrice,
          "seller: price out of range");
  check_demand_vectors(offer.demands, offer.demand_prices, k, "seller");
}

void validate(const Scenario& scenario) {
  require(scenario.area_size > 0 && scenario.area_size <= kMaxCoordinate,
          "scenario: area_size out of range");
  require(scenario.k >= 0 && scenario.k <= kMaxDemands,
          "scenario: k outside [0, 64]");
  std::vector<std::int64_t> seen;
  for (const auto& b : scenario.buyers) {
    validate(b, scenario.area_size, scenario.k);
    for (std::int64_t id : seen) {
      require(id != b.id, "scenario: duplicate buyer id");
    }
    seen.push_back(b.id);
  }
  seen.clear();
  for (const auto& s : scenario.sellers) {
    validate(s, scenario.area_size, scenario.k);
    for (std::int64_t id : seen) {
      require(id != s.id, "scenario: duplicate seller id");
    }
    seen.push_back(s.id);
  }
}

EncryptedProfile encrypt_buyer(const PublicKey& pk, const BuyerRequest& req,
                               Rng& rng, matching::OpCounters* counters) {
  EncryptedProfile p;
  p.id = req.id;
  p.role = Role::Buyer;
  p.ct_x = enc(pk, req.x, rng, counters);
  p.ct_y = enc(pk, req.y, rng, counters);
  p.ct_price = enc(pk, req.price, rng, counters);
  p.ct_dmax = enc(pk, req.d_max, rng, counters);
  for (int bit : req.demands) {
    p.ct_demands.push_back(enc(pk, bit, rng, counters));
  }
  for (std::int64_t dp : req.demand_prices) {
    p.ct_demand_prices.push_back(enc(pk, dp, rng, counters));
  }
  p.ct_weights.push_back(enc(pk, req.weights.w_d, rng, counters));
  p.ct_weights.push_back(enc(pk, req.weights.w_r, rng, counters));
  for (std::int64_t w : req.weights.w_alpha) {
    p.ct_weights.push_back(enc(pk, w, rng, counters));
  }
  return p;
}

EncryptedProfile encrypt_seller(const PublicKey& pk, const SellerOffer& offer,
                                Rng& rng, matching::OpCounters* counters) {
  EncryptedProfile p;
  p.id = offer.id;
  p.role = Role::Seller;
  p.ct_x = enc(pk, offer.x, rng, counters);
  p.ct_y = enc(pk, offer.y, rng, counters);
  p.ct_price = enc(pk, offer.price, rng, counters);
  for (int bit : offer.demands) {
    p.ct_demands.push_back(enc(pk, bit, rng, counters));
  }
  for (std::int64_t dp : offer.demand_prices) {
    p.ct_demand_prices.push_back(enc(pk, dp, rng, counters));
  }
  return p;
}

PairRecord pair_process(const PublicKey& pk, const EncryptedProfile& buyer,
                        const EncryptedProfile& seller,
                        matching::OpCounters* counters) {
  if (buyer.role != Role::Buyer || seller.role != Role::Seller) {
    throw SchemaError("pair_process: role mismatch");
  }
  if (buyer.ct_demands.size() != seller.ct_demands.size() ||
      buyer.ct_demand_prices.size() != seller.ct_demand_prices.size()) {
    throw SchemaError("pair_process: demand dimension mismatch");
  }
  auto sub = [&](const Ciphertext& a, const Ciphertext& b) {
    Ciphertext out = paillier::he_sub(pk, a, b);
    if (counters != nullptr) {
      ++counters->he_subs;
    }
    return out;
  };
  auto add = [&](const Ciphertext& a, const Ciphertext& b) {
    Ciphertext out = paillier::he_add(pk, a, b);
    if (counters != nullptr) {
      ++counters->he_adds;
    }
    return out;
  };

  PairRecord rec;
  rec.buyer_id = buyer.id;
  rec.seller_id = seller.id;
  rec.ct_dx = sub(buyer.ct_x, seller.ct_x);
  rec.ct_dy = sub(buyer.ct_y, seller.ct_y);
  rec.ct_dr = sub(buyer.ct_price, seller.ct_price);
  for (std::size_t t = 0; t < buyer.ct_demands.size(); ++t) {
    rec.ct_alpha_sum.push_back(add(buyer.ct_demands[t], seller.ct_demands[t]));
  }
  for (std::size_t t = 0; t < buyer.ct_demand_prices.size(); ++t) {
    rec.ct_dr_alpha.push_back(
        sub(buyer.ct_demand_prices[t], seller.ct_demand_prices[t]));
  }
  return rec;
}

namespace {

nlohmann::ordered_json weights_to_json(const PreferenceWeights& w) {
  return nlohmann::ordered_json{
      {"w_d", w.w_d}, {"w_r", w.w_r}, {"w_alpha", w.w_alpha}};
}

std::int64_t get_int(const nlohmann::json& j, const char* key,
                     const std::string& ctx) {
  if (!j.contains(key)) {
    throw SchemaError(ctx + ": missing field '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw SchemaError(ctx + ": field '" + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

template <typename T>
std::vector<T> get_int_array(const nlohmann::json& j, const char* key,
                             const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw SchemaError(ctx + ": missing array field '" + key + "'");
  }
  std::vector<T> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer()) {
      throw SchemaError(ctx + ": '" + key + "' must contain integers only");
    }
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace

nlohmann::ordered_json scenario_to_json(const Scenario& scenario) {
  nlohmann::ordered_json j;
  j["area_size"] = scenario.area_size;
  j["k"] = scenario.k;
  j["buyers"] = nlohmann::ordered_json::array();
  for (const auto& b : scenario.buyers) {
    j["buyers"].push_back(nlohmann::ordered_json{
        {"id", b.id},
        {"x", b.x},
        {"y", b.y},
        {"price", b.price},
        {"d_max", b.d_max},
        {"demands", b.demands},
        {"demand_prices", b.demand_prices},
        {"weights", weights_to_json(b.weights)}});
  }
  j["sellers"] = nlohmann::ordered_json::array();
  for (const auto& s : scenario.sellers) {
    j["sellers"].push_back(nlohmann::ordered_json{
        {"id", s.id},
        {"x", s.x},
        {"y", s.y},
        {"price", s.price},
        {"demands", s.demands},
        {"demand_prices", s.demand_prices}});
  }
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.area_size = get_int(j, "area_size", "scenario");
  s.k = static_cast<int>(get_int(j, "k", "scenario"));
  if (!j.contains("buyers") || !j.contains("sellers")) {
    throw SchemaError("scenario: missing buyers or sellers array");
  }
  for (const auto& bj : j.at("buyers")) {
    BuyerRequest b;
    b.id = get_int(bj, "id", "buyer");
    b.x = get_int(bj, "x", "buyer");
    b.y = get_int(bj, "y", "buyer");
    b.price = get_int(bj, "price", "buyer");
    b.d_max = get_int(bj, "d_max", "buyer");
    b.demands = get_int_array<int>(bj, "demands", "buyer");
    b.demand_prices = get_int_array<std::int64_t>(bj, "demand_prices", "buyer");
    if (!bj.contains("weights")) {
      throw SchemaError("buyer: missing weights");
    }
    const auto& wj = bj.at("weights");
    b.weights.w_d = get_int(wj, "w_d", "weights");
    b.weights.w_r = get_int(wj, "w_r", "weights");
    b.weights.w_alpha = get_int_array<std::int64_t>(wj, "w_alpha", "weights");
    s.buyers.push_back(std::move(b));
  }
  for (const auto& sj : j.at("sellers")) {
    SellerOffer o;
    o.id = get_int(sj, "id", "seller");
    o.x = get_int(sj, "x", "seller");
    o.y = get_int(sj, "y", "seller");
    o.price = get_int(sj, "price", "seller");
    o.demands = get_int_array<int>(sj, "demands", "seller");
    o.demand_prices =
        get_int_array<std::int64_t>(sj, "demand_prices", "seller");
    s.sellers.push_back(std::move(o));
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot open scenario file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("scenario JSON parse error: " + std::string(e.what()));
  }
  return scenario_from_json(j);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw SchemaError("cannot write scenario file: " + path);
  }
  out << scenario_to_json(scenario).dump(2) << "\n";
}

}  // namespace ppcharge::protocol
