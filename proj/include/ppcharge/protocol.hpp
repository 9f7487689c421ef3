#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ppcharge/counters.hpp"
#include "ppcharge/paillier.hpp"
#include "ppcharge/rng.hpp"

// Plaintext and encrypted data models for buyers, sellers and the messages
// they exchange. Everything here is pure construction and transformation of
// immutable values; nothing in this module can decrypt (no function takes a
// private key), which is what keeps the proxy role blind by construction.
//
// Fixed-point conventions: coordinates in whole meters, prices in currency
// minor units, preference weights scaled by 10^3. All arithmetic is exact
// integer arithmetic; the JSON schema carries integers only.

namespace ppcharge::protocol {

struct SchemaError : paillier::Error {
  using paillier::Error::Error;
};

// Weights of the matching index terms, scale 10^3 (1000 = weight 1.0).
struct PreferenceWeights {
  std::int64_t w_d = 0;
  std::int64_t w_r = 0;
  std::vector<std::int64_t> w_alpha;

  bool operator==(const PreferenceWeights&) const = default;
};

struct BuyerRequest {
  std::int64_t id = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t price = 0;
  std::int64_t d_max = 0;
  std::vector<int> demands;                 // bits, length k
  std::vector<std::int64_t> demand_prices;  // 0 wherever the bit is 0
  PreferenceWeights weights;

  bool operator==(const BuyerRequest&) const = default;
};

struct SellerOffer {
  std::int64_t id = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t price = 0;
  std::vector<int> demands;
  std::vector<std::int64_t> demand_prices;

  bool operator==(const SellerOffer&) const = default;
};

enum class Role { Buyer, Seller };

// Field-wise encryption of one profile under the current round key.
// Weight ciphertexts are ordered w_d, w_r, then the k per-demand weights.
struct EncryptedProfile {
  std::int64_t id = 0;
  Role role = Role::Buyer;
  paillier::Ciphertext ct_x;
  paillier::Ciphertext ct_y;
  paillier::Ciphertext ct_price;
  std::optional<paillier::Ciphertext> ct_dmax;  // buyers only
  std::vector<paillier::Ciphertext> ct_demands;
  std::vector<paillier::Ciphertext> ct_demand_prices;
  std::vector<paillier::Ciphertext> ct_weights;  // buyers only

  std::size_t ciphertext_count() const;
  std::size_t wire_bytes() const;
};

// Homomorphically processed (buyer, seller) pair: differences of location,
// price and demand prices, sums of demand bits. Produced exclusively by
// he_add/he_sub on two profiles under one round key.
struct PairRecord {
  std::int64_t buyer_id = 0;
  std::int64_t seller_id = 0;
  paillier::Ciphertext ct_dx;
  paillier::Ciphertext ct_dy;
  paillier::Ciphertext ct_dr;
  std::vector<paillier::Ciphertext> ct_alpha_sum;
  std::vector<paillier::Ciphertext> ct_dr_alpha;

  std::size_t wire_bytes() const;
};

// The pair after cloud-side decryption and signed decoding.
struct DecryptedPair {
  std::int64_t buyer_id = 0;
  std::int64_t seller_id = 0;
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  std::int64_t dr = 0;
  std::vector<int> alpha_sum;  // each in {0, 1, 2}
  std::vector<std::int64_t> dr_alpha;

  bool operator==(const DecryptedPair&) const = default;
};

// A full plaintext problem instance: the scenario-file content.
struct Scenario {
  std::int64_t area_size = 3000;
  int k = 0;
  std::vector<BuyerRequest> buyers;
  std::vector<SellerOffer> sellers;
};

// Throws SchemaError when an invariant is violated (range bounds, demand
// price present without the demand bit, weight vector length, ...).
void validate(const BuyerRequest& req, std::int64_t area_size, int k);
void validate(const SellerOffer& offer, std::int64_t area_size, int k);
void validate(const Scenario& scenario);

// Field-wise encryption with fresh randomness per field. Throws RangeError
// when a field exceeds the key's plaintext half-range. Bumps
// counters->encryptions once per ciphertext when counters is non-null.
EncryptedProfile encrypt_buyer(const paillier::PublicKey& pk,
                               const BuyerRequest& req, Rng& rng,
                               matching::OpCounters* counters = nullptr);
EncryptedProfile encrypt_seller(const paillier::PublicKey& pk,
                                const SellerOffer& offer, Rng& rng,
                                matching::OpCounters* counters = nullptr);

// Homomorphic pair processing: 3 + k subtractions (dx, dy, dr, and the
// demand price differences) plus k additions (demand bit sums), 2k+3
// operations in total, counted into `counters` when non-null.
PairRecord pair_process(const paillier::PublicKey& pk,
                        const EncryptedProfile& buyer,
                        const EncryptedProfile& seller,
                        matching::OpCounters* counters = nullptr);

// Scenario JSON schema (documented in the README): field names exactly as
// the struct definitions, integers only.
nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace ppcharge::protocol
