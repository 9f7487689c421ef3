#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ppcharge/matching.hpp"
#include "ppcharge/paillier.hpp"
#include "ppcharge/protocol.hpp"
#include "ppcharge/rng.hpp"

// The five-entity protocol run as an in-process simulated network: CA key
// issuance, buyer/seller submission, proxy homomorphic processing, cloud
// decryption + matching, result return with re-encryption, and per-round
// key refresh. Entity interactions are direct calls routed through a
// message log that records every message (sender, receiver, payload kind,
// byte size) plus a classification of each payload value, which makes the
// no-plaintext-on-the-wire property mechanically checkable.
//
// Role isolation is structural: the proxy type holds only the round public
// key and cannot decrypt; only the cloud ever holds the round private key
// before result return.
//
// The round lifecycle is a single logical thread (open -> submit -> proxy
// -> cloud -> return -> close); output is deterministic for a fixed seed.

namespace ppcharge::orchestrator {

struct LifecycleError : paillier::Error {
  using paillier::Error::Error;
};

// ---------------------------------------------------------------------------
// Message log

enum class ValueClass {
  EntityId,           // plaintext entity identifier (carries no profile data)
  PublicKeyMaterial,  // n, g of some public key
  PrivateKeyMaterial, // round private key components (CA -> cloud only)
  CiphertextData,     // a Paillier ciphertext
  EncryptedKeyChunk,  // round private key chunk under a personal key
  PlainNumber,        // an unencrypted numeric value
  Metadata,           // round numbers, structural sizes
};

struct PayloadItem {
  ValueClass cls;
  std::string token;  // decimal value for audits; empty for ciphertexts
};

struct MessageRecord {
  int round = 0;
  std::string step;
  std::string sender;
  std::string receiver;
  std::string payload_kind;
  std::size_t bytes = 0;
  bool return_delivery = false;
  std::vector<PayloadItem> items;

  std::string line() const;  // "round,step,sender,receiver,kind,bytes"
};

class MessageLog {
 public:
  void append(MessageRecord rec) { records_.push_back(std::move(rec)); }
  const std::vector<MessageRecord>& records() const { return records_; }
  void write(std::ostream& out) const;

 private:
  std::vector<MessageRecord> records_;
};

// ---------------------------------------------------------------------------
// Round private key transport (chunked, per the personal-key plaintext range)

// Fixed-width big-endian serialization of (p, q); width returned is the
// number of bytes per prime.
std::vector<std::uint8_t> serialize_round_sk(const paillier::PrivateKey& sk,
                                             unsigned& prime_width);

// Splits into chunks of personal_pk.bits()/8 - 1 bytes (strictly below the
// personal modulus) and encrypts each with the parameter-optimized scheme.
std::vector<paillier::Ciphertext> encrypt_sk_chunks(
    const std::vector<std::uint8_t>& sk_bytes,
    const paillier::PublicKey& personal_pk, Rng& rng);

// Inverse of the two steps above, given the recipient's personal keys.
std::pair<BigInt, BigInt> decrypt_sk_chunks(
    const std::vector<paillier::Ciphertext>& chunks,
    const paillier::KeyPair& personal, unsigned prime_width,
    matching::OpCounters* counters = nullptr);

// ---------------------------------------------------------------------------
// Return packages

struct ReturnPackage {
  std::int64_t recipient_id = 0;
  protocol::Role recipient_role = protocol::Role::Buyer;
  std::int64_t counterparty_id = 0;
  unsigned prime_width = 0;
  std::vector<paillier::Ciphertext> ct_sk;  // chunked round sk
  paillier::Ciphertext ct_loc_x;            // counterparty location (round key)
  paillier::Ciphertext ct_loc_y;
  std::optional<paillier::Ciphertext> ct_price;  // seller price, buyers only

  std::size_t wire_bytes() const;
};

struct RecoveredCounterparty {
  std::int64_t counterparty_id = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::optional<std::int64_t> price;
};

// ---------------------------------------------------------------------------
// Roles

// Proxy role: collects encrypted profiles, runs the homomorphic pair
// processing, retains location/price ciphertexts for the return phase.
// Holds the round public key and nothing else, so it cannot decrypt.
class ProxyStore {
 public:
  void open(const paillier::PublicKey& pk);
  void close();
  void register_profile(protocol::EncryptedProfile profile);
  std::vector<protocol::PairRecord> process(matching::OpCounters& counters);

  const protocol::EncryptedProfile& stored(protocol::Role role,
                                           std::int64_t id) const;
  bool has(protocol::Role role, std::int64_t id) const;
  std::size_t buyer_count() const { return buyers_.size(); }
  std::size_t seller_count() const { return sellers_.size(); }
  std::uint64_t round_key_id() const;

 private:
  std::optional<paillier::PublicKey> pk_;
  std::map<std::int64_t, protocol::EncryptedProfile> buyers_;
  std::map<std::int64_t, protocol::EncryptedProfile> sellers_;
};

// One decrypted value with its provenance tag, e.g. "pair.dx" or
// "buyer.d_max". The cloud records everything it decrypts here; audits
// verify only differences, sums and buyer metadata ever appear.
struct DecryptedValue {
  std::string kind;
  std::int64_t value = 0;
};

// Cloud role: the only holder of the round private key. Decrypts pair
// records and buyer metadata via the CRT route, runs the matching, and
// re-encrypts the round key for matched users.
class CloudService {
 public:
  void open(paillier::KeyPair round_keys);
  void close();

  protocol::DecryptedPair decrypt_pair(const protocol::PairRecord& rec,
                                       matching::OpCounters& counters);
  matching::BuyerMeta decrypt_buyer_meta(
      const protocol::EncryptedProfile& profile,
      matching::OpCounters& counters);
  std::vector<paillier::Ciphertext> encrypt_round_sk(
      const paillier::PublicKey& personal_pk, Rng& rng,
      matching::OpCounters& counters, unsigned& prime_width) const;

  const paillier::PublicKey& round_pk() const;
  const std::vector<DecryptedValue>& decrypted_log() const {
    return decrypted_log_;
  }

 private:
  std::int64_t dec_signed(const paillier::Ciphertext& ct,
                          matching::OpCounters& counters,
                          const std::string& kind);
  std::optional<paillier::KeyPair> keys_;
  std::vector<DecryptedValue> decrypted_log_;
};

// ---------------------------------------------------------------------------
// Protocol run

struct ProtocolConfig {
  unsigned key_bits = 512;
  paillier::GMode round_key_mode = paillier::GMode::RandomG;
  matching::DemandPolicy policy{};
  std::uint64_t seed = 1;
  int max_rounds = 64;
};

struct RoundCounters {
  matching::OpCounters buyers;
  matching::OpCounters sellers;
  matching::OpCounters proxy;
  matching::OpCounters cloud;

  matching::OpCounters entities() const {
    matching::OpCounters sum = buyers;
    sum += sellers;
    return sum;
  }
};

struct RoundOutcome {
  int round = 0;
  int active_buyers = 0;
  int active_sellers = 0;
  int k = 0;
  std::uint64_t round_key_id = 0;
  std::vector<matching::MatchResult> matches;
  std::vector<protocol::DecryptedPair> decrypted_pairs;
  RoundCounters counters;
};

struct RunReport {
  std::vector<matching::MatchResult> matches;
  std::vector<RoundOutcome> rounds;
  std::vector<std::int64_t> unmatched_buyers;
};

class ProtocolRun {
 public:
  ProtocolRun(protocol::Scenario scenario, ProtocolConfig cfg);

  // Round lifecycle, step by step. open_round issues fresh CA keys and
  // returns false (refusing to open) when a non-first round finds the
  // buyer or seller pool empty.
  bool open_round();
  void submit_all();
  void submit_buyer(const protocol::BuyerRequest& request);
  void submit_seller(const protocol::SellerOffer& offer);
  // Raw registration path, used to exercise stale-key rejection.
  void register_with_proxy(protocol::EncryptedProfile profile);
  const std::vector<protocol::PairRecord>& proxy_phase();
  const std::vector<matching::MatchResult>& cloud_phase();
  void result_return();
  RoundOutcome close_round();

  // Whole protocol: rounds until the seller pool or buyer pool is empty or
  // a round matches nobody.
  RunReport run_all();

  // Inspection.
  int round() const { return round_; }
  const MessageLog& log() const { return log_; }
  const paillier::PublicKey& round_pk() const;
  const ProxyStore& proxy() const { return proxy_; }
  const CloudService& cloud() const { return cloud_; }
  const RoundCounters& counters() const { return counters_; }
  const std::vector<RoundOutcome>& history() const { return history_; }
  std::vector<std::int64_t> active_buyers() const;
  std::vector<std::int64_t> active_sellers() const;
  const std::optional<RecoveredCounterparty>& recovered_by_buyer(
      std::int64_t id) const;
  const std::optional<RecoveredCounterparty>& recovered_by_seller(
      std::int64_t id) const;
  const protocol::Scenario& scenario() const { return scenario_; }
  const ProtocolConfig& config() const { return cfg_; }

 private:
  enum class Phase { Idle, Open, Processed, Matched, Returned };

  void require_phase(Phase expected, const char* op) const;
  void log_message(const std::string& step, const std::string& sender,
                   const std::string& receiver,
                   const std::string& payload_kind, std::size_t bytes,
                   std::vector<PayloadItem> items = {},
                   bool return_delivery = false);
  ReturnPackage build_return_package(const matching::MatchResult& match,
                                     protocol::Role recipient_role);
  void deliver_return_package(const ReturnPackage& pkg,
                              const paillier::KeyPair& personal);
  std::vector<std::int64_t> active_buyer_submissions() const;

  protocol::Scenario scenario_;
  ProtocolConfig cfg_;
  Rng rng_;
  MessageLog log_;

  Phase phase_ = Phase::Idle;
  int round_ = 0;
  std::optional<paillier::KeyPair> ca_issued_;  // mirrored to cloud_
  ProxyStore proxy_;
  CloudService cloud_;
  RoundCounters counters_;
  std::vector<protocol::PairRecord> pair_records_;
  std::vector<matching::MatchResult> round_matches_;
  std::vector<protocol::DecryptedPair> round_pairs_plain_;

  std::map<std::int64_t, protocol::BuyerRequest> buyer_pool_;
  std::map<std::int64_t, protocol::SellerOffer> seller_pool_;
  std::map<std::int64_t, std::optional<RecoveredCounterparty>>
      buyer_recovered_;
  std::map<std::int64_t, std::optional<RecoveredCounterparty>>
      seller_recovered_;

  std::vector<RoundOutcome> history_;
};

// ---------------------------------------------------------------------------
// Post-run audits (used by the CLI and the acceptance suite)

struct AuditReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Structural invariants over a completed run: per-round counter formulas
// (proxy = I*J*(2k+3), cloud = I*J*(2k+3) + I*(3+k), entities =
// I*(6+3k) + J*(3+2k)), seller uniqueness, round-key freshness, proxy
// decryption count zero, filter soundness of every match, and return
// fidelity against the plaintext scenario.
AuditReport check_run_invariants(const ProtocolRun& run);

// Message-log audit: outside return deliveries, no payload value classified
// as a plain number may equal any profile field value (coordinates, prices,
// d_max, demand prices, weights). Entity ids are plaintext by design.
AuditReport audit_message_log(const protocol::Scenario& scenario,
                              const MessageLog& log);

}  // namespace ppcharge::orchestrator
