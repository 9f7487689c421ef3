#include "ppcharge/orchestrator.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace ppcharge::orchestrator {

namespace {

using paillier::Ciphertext;
using paillier::KeyPair;
using paillier::PrivateKey;
using paillier::PublicKey;

std::string entity_name(protocol::Role role, std::int64_t id) {
  return (role == protocol::Role::Buyer ? "buyer:" : "seller:") +
         std::to_string(id);
}

void check_profile_key(const protocol::EncryptedProfile& profile,
                       std::uint64_t key_id) {
  auto check = [&](const Ciphertext& ct) {
    if (ct.key_id != key_id) {
      throw paillier::KeyMismatchError(
          "profile ciphertext was not produced under the current round key");
    }
  };
  check(profile.ct_x);
  check(profile.ct_y);
  check(profile.ct_price);
  if (profile.ct_dmax.has_value()) {
    check(*profile.ct_dmax);
  }
  for (const auto& ct : profile.ct_demands) check(ct);
  for (const auto& ct : profile.ct_demand_prices) check(ct);
  for (const auto& ct : profile.ct_weights) check(ct);
}

std::size_t pk_wire_bytes(const PublicKey& pk) {
  return paillier::export_be(pk.n()).size() +
         paillier::export_be(pk.g()).size() + 1;
}

std::size_t ct_wire_bytes(const Ciphertext& ct) {
  return paillier::to_bytes(ct).size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Message log

std::string MessageRecord::line() const {
  std::ostringstream out;
  out << round << ',' << step << ',' << sender << ',' << receiver << ','
      << payload_kind << ',' << bytes;
  return out.str();
}

void MessageLog::write(std::ostream& out) const {
  for (const auto& rec : records_) {
    out << rec.line() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Round key transport

std::vector<std::uint8_t> serialize_round_sk(const PrivateKey& sk,
                                             unsigned& prime_width) {
  std::size_t wp = paillier::export_be(sk.p()).size();
  std::size_t wq = paillier::export_be(sk.q()).size();
  prime_width = static_cast<unsigned>(std::max(wp, wq));
  std::vector<std::uint8_t> out =
      paillier::export_be_padded(sk.p(), prime_width);
  std::vector<std::uint8_t> q_bytes =
      paillier::export_be_padded(sk.q(), prime_width);
  out.insert(out.end(), q_bytes.begin(), q_bytes.end());
  return out;
}

std::vector<Ciphertext> encrypt_sk_chunks(
    const std::vector<std::uint8_t>& sk_bytes, const PublicKey& personal_pk,
    Rng& rng) {
  std::size_t chunk_len = personal_pk.bits() / 8;
  chunk_len = chunk_len > 1 ? chunk_len - 1 : 1;
  std::vector<Ciphertext> chunks;
  for (std::size_t off = 0; off < sk_bytes.size(); off += chunk_len) {
    std::size_t len = std::min(chunk_len, sk_bytes.size() - off);
    BigInt m = paillier::import_be(
        std::span(sk_bytes.data() + off, len));
    chunks.push_back(paillier::encrypt_optimized(personal_pk, m, rng));
  }
  return chunks;
}

std::pair<BigInt, BigInt> decrypt_sk_chunks(
    const std::vector<Ciphertext>& chunks, const KeyPair& personal,
    unsigned prime_width, matching::OpCounters* counters) {
  std::size_t chunk_len = personal.pk.bits() / 8;
  chunk_len = chunk_len > 1 ? chunk_len - 1 : 1;
  std::size_t total = 2 * static_cast<std::size_t>(prime_width);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(total);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    BigInt m = paillier::decrypt_optimized(personal.sk, personal.pk,
                                           chunks[i]);
    if (counters != nullptr) {
      ++counters->decryptions;
    }
    std::size_t len = std::min(chunk_len, total - i * chunk_len);
    std::vector<std::uint8_t> part = paillier::export_be_padded(m, len);
    bytes.insert(bytes.end(), part.begin(), part.end());
  }
  if (bytes.size() != total) {
    throw paillier::CiphertextError("round key transport length mismatch");
  }
  BigInt p = paillier::import_be(std::span(bytes.data(), prime_width));
  BigInt q =
      paillier::import_be(std::span(bytes.data() + prime_width, prime_width));
  return {p, q};
}

std::size_t ReturnPackage::wire_bytes() const {
  std::size_t total = 8 + 8 + 4;  // ids and prime width
  for (const auto& ct : ct_sk) total += ct_wire_bytes(ct);
  total += ct_wire_bytes(ct_loc_x) + ct_wire_bytes(ct_loc_y);
  if (ct_price.has_value()) {
    total += ct_wire_bytes(*ct_price);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Proxy role

void ProxyStore::open(const PublicKey& pk) {
  pk_ = pk;
  buyers_.clear();
  sellers_.clear();
}

void ProxyStore::close() {
  pk_.reset();
  buyers_.clear();
  sellers_.clear();
}

void ProxyStore::register_profile(protocol::EncryptedProfile profile) {
  if (!pk_.has_value()) {
    throw LifecycleError("proxy: no round is open");
  }
  check_profile_key(profile, pk_->key_id());
  if (profile.role == protocol::Role::Buyer) {
    if (!profile.ct_dmax.has_value() || profile.ct_weights.size() < 2) {
      throw protocol::SchemaError("buyer profile missing d_max or weights");
    }
    buyers_[profile.id] = std::move(profile);
  } else {
    sellers_[profile.id] = std::move(profile);
  }
}

std::vector<protocol::PairRecord> ProxyStore::process(
    matching::OpCounters& counters) {
  if (!pk_.has_value()) {
    throw LifecycleError("proxy: no round is open");
  }
  std::vector<protocol::PairRecord> records;
  records.reserve(buyers_.size() * sellers_.size());
  for (const auto& [buyer_id, buyer] : buyers_) {
    for (const auto& [seller_id, seller] : sellers_) {
      records.push_back(protocol::pair_process(*pk_, buyer, seller,
                                               &counters));
    }
  }
  return records;
}

const protocol::EncryptedProfile& ProxyStore::stored(protocol::Role role,
                                                     std::int64_t id) const {
  const auto& store = role == protocol::Role::Buyer ? buyers_ : sellers_;
  auto it = store.find(id);
  if (it == store.end()) {
    throw LifecycleError("proxy: no stored profile for that entity");
  }
  return it->second;
}

bool ProxyStore::has(protocol::Role role, std::int64_t id) const {
  const auto& store = role == protocol::Role::Buyer ? buyers_ : sellers_;
  return store.count(id) > 0;
}

std::uint64_t ProxyStore::round_key_id() const {
  if (!pk_.has_value()) {
    throw LifecycleError("proxy: no round is open");
  }
  return pk_->key_id();
}

// ---------------------------------------------------------------------------
// Cloud role

void CloudService::open(KeyPair round_keys) {
  keys_ = std::move(round_keys);
  decrypted_log_.clear();
}

void CloudService::close() { keys_.reset(); }

const PublicKey& CloudService::round_pk() const {
  if (!keys_.has_value()) {
    throw LifecycleError("cloud: no round is open");
  }
  return keys_->pk;
}

std::int64_t CloudService::dec_signed(const Ciphertext& ct,
                                      matching::OpCounters& counters,
                                      const std::string& kind) {
  BigInt m = paillier::decrypt_crt(keys_->sk, keys_->pk, ct);
  ++counters.decryptions;
  std::int64_t value = paillier::decode_signed_i64(keys_->pk, m);
  decrypted_log_.push_back(DecryptedValue{kind, value});
  return value;
}

protocol::DecryptedPair CloudService::decrypt_pair(
    const protocol::PairRecord& rec, matching::OpCounters& counters) {
  if (!keys_.has_value()) {
    throw LifecycleError("cloud: no round is open");
  }
  protocol::DecryptedPair pair;
  pair.buyer_id = rec.buyer_id;
  pair.seller_id = rec.seller_id;
  pair.dx = dec_signed(rec.ct_dx, counters, "pair.dx");
  pair.dy = dec_signed(rec.ct_dy, counters, "pair.dy");
  pair.dr = dec_signed(rec.ct_dr, counters, "pair.dr");
  for (const auto& ct : rec.ct_alpha_sum) {
    std::int64_t sum = dec_signed(ct, counters, "pair.alpha_sum");
    if (sum < 0 || sum > 2) {
      throw paillier::CiphertextError("demand bit sum outside {0,1,2}");
    }
    pair.alpha_sum.push_back(static_cast<int>(sum));
  }
  for (const auto& ct : rec.ct_dr_alpha) {
    pair.dr_alpha.push_back(dec_signed(ct, counters, "pair.dr_alpha"));
  }
  return pair;
}

matching::BuyerMeta CloudService::decrypt_buyer_meta(
    const protocol::EncryptedProfile& profile,
    matching::OpCounters& counters) {
  if (!keys_.has_value()) {
    throw LifecycleError("cloud: no round is open");
  }
  if (profile.role != protocol::Role::Buyer || !profile.ct_dmax.has_value() ||
      profile.ct_weights.size() < 2) {
    throw protocol::SchemaError("buyer metadata incomplete");
  }
  matching::BuyerMeta meta;
  meta.d_max = dec_signed(*profile.ct_dmax, counters, "buyer.d_max");
  meta.weights.w_d = dec_signed(profile.ct_weights[0], counters, "buyer.w_d");
  meta.weights.w_r = dec_signed(profile.ct_weights[1], counters, "buyer.w_r");
  for (std::size_t t = 2; t < profile.ct_weights.size(); ++t) {
    meta.weights.w_alpha.push_back(
        dec_signed(profile.ct_weights[t], counters, "buyer.w_alpha"));
  }
  return meta;
}

std::vector<Ciphertext> CloudService::encrypt_round_sk(
    const PublicKey& personal_pk, Rng& rng, matching::OpCounters& counters,
    unsigned& prime_width) const {
  if (!keys_.has_value()) {
    throw LifecycleError("cloud: no round is open");
  }
  std::vector<std::uint8_t> bytes = serialize_round_sk(keys_->sk, prime_width);
  std::vector<Ciphertext> chunks = encrypt_sk_chunks(bytes, personal_pk, rng);
  counters.encryptions += static_cast<std::int64_t>(chunks.size());
  return chunks;
}

// ---------------------------------------------------------------------------
// Protocol run

ProtocolRun::ProtocolRun(protocol::Scenario scenario, ProtocolConfig cfg)
    : scenario_(std::move(scenario)), cfg_(cfg), rng_(cfg.seed) {
  protocol::validate(scenario_);
  for (const auto& b : scenario_.buyers) {
    buyer_pool_[b.id] = b;
    buyer_recovered_[b.id] = std::nullopt;
  }
  for (const auto& s : scenario_.sellers) {
    seller_pool_[s.id] = s;
    seller_recovered_[s.id] = std::nullopt;
  }
}

void ProtocolRun::require_phase(Phase expected, const char* op) const {
  if (phase_ != expected) {
    throw LifecycleError(std::string(op) +
                         ": called outside its lifecycle phase");
  }
}

void ProtocolRun::log_message(const std::string& step,
                              const std::string& sender,
                              const std::string& receiver,
                              const std::string& payload_kind,
                              std::size_t bytes,
                              std::vector<PayloadItem> items,
                              bool return_delivery) {
  log_.append(MessageRecord{round_, step, sender, receiver, payload_kind,
                            bytes, return_delivery, std::move(items)});
}

const PublicKey& ProtocolRun::round_pk() const {
  if (!ca_issued_.has_value()) {
    throw LifecycleError("no round is open");
  }
  return ca_issued_->pk;
}

std::vector<std::int64_t> ProtocolRun::active_buyers() const {
  std::vector<std::int64_t> out;
  for (const auto& [id, _] : buyer_pool_) {
    out.push_back(id);
  }
  return out;
}

std::vector<std::int64_t> ProtocolRun::active_sellers() const {
  std::vector<std::int64_t> out;
  for (const auto& [id, _] : seller_pool_) {
    out.push_back(id);
  }
  return out;
}

const std::optional<RecoveredCounterparty>& ProtocolRun::recovered_by_buyer(
    std::int64_t id) const {
  return buyer_recovered_.at(id);
}

const std::optional<RecoveredCounterparty>& ProtocolRun::recovered_by_seller(
    std::int64_t id) const {
  return seller_recovered_.at(id);
}

bool ProtocolRun::open_round() {
  require_phase(Phase::Idle, "open_round");
  if (round_ >= 1 && (buyer_pool_.empty() || seller_pool_.empty())) {
    return false;
  }
  ++round_;
  KeyPair keys = paillier::keygen(cfg_.key_bits, cfg_.round_key_mode, rng_);
  log_message("key-issue", "ca", "all-entities", "round-public-key",
              pk_wire_bytes(keys.pk),
              {PayloadItem{ValueClass::PublicKeyMaterial, ""}});
  log_message("key-issue", "ca", "cloud", "round-keypair",
              pk_wire_bytes(keys.pk) +
                  paillier::export_be(keys.sk.p()).size() +
                  paillier::export_be(keys.sk.q()).size(),
              {PayloadItem{ValueClass::PrivateKeyMaterial, ""}});
  proxy_.open(keys.pk);
  cloud_.open(keys);
  ca_issued_ = std::move(keys);
  counters_ = RoundCounters{};
  pair_records_.clear();
  round_matches_.clear();
  round_pairs_plain_.clear();
  phase_ = Phase::Open;
  return true;
}

void ProtocolRun::submit_buyer(const protocol::BuyerRequest& request) {
  require_phase(Phase::Open, "submit");
  protocol::validate(request, scenario_.area_size, scenario_.k);
  protocol::EncryptedProfile profile = protocol::encrypt_buyer(
      round_pk(), request, rng_, &counters_.buyers);
  std::vector<PayloadItem> items{PayloadItem{
      ValueClass::EntityId, std::to_string(request.id)}};
  items.insert(items.end(), profile.ciphertext_count(),
               PayloadItem{ValueClass::CiphertextData, ""});
  log_message("submission", entity_name(protocol::Role::Buyer, request.id),
              "proxy", "encrypted-profile", profile.wire_bytes(),
              std::move(items));
  buyer_pool_[request.id] = request;
  buyer_recovered_.emplace(request.id, std::nullopt);
  proxy_.register_profile(std::move(profile));
}

void ProtocolRun::submit_seller(const protocol::SellerOffer& offer) {
  require_phase(Phase::Open, "submit");
  protocol::validate(offer, scenario_.area_size, scenario_.k);
  protocol::EncryptedProfile profile = protocol::encrypt_seller(
      round_pk(), offer, rng_, &counters_.sellers);
  std::vector<PayloadItem> items{
      PayloadItem{ValueClass::EntityId, std::to_string(offer.id)}};
  items.insert(items.end(), profile.ciphertext_count(),
               PayloadItem{ValueClass::CiphertextData, ""});
  log_message("submission", entity_name(protocol::Role::Seller, offer.id),
              "proxy", "encrypted-profile", profile.wire_bytes(),
              std::move(items));
  seller_pool_[offer.id] = offer;
  seller_recovered_.emplace(offer.id, std::nullopt);
  proxy_.register_profile(std::move(profile));
}

void ProtocolRun::register_with_proxy(protocol::EncryptedProfile profile) {
  require_phase(Phase::Open, "submit");
  proxy_.register_profile(std::move(profile));
}

void ProtocolRun::submit_all() {
  for (const auto& [id, request] : buyer_pool_) {
    submit_buyer(request);
  }
  for (const auto& [id, offer] : seller_pool_) {
    submit_seller(offer);
  }
}

const std::vector<protocol::PairRecord>& ProtocolRun::proxy_phase() {
  require_phase(Phase::Open, "proxy_phase");
  pair_records_ = proxy_.process(counters_.proxy);
  std::size_t bytes = 0;
  std::vector<PayloadItem> items;
  for (const auto& rec : pair_records_) {
    bytes += rec.wire_bytes();
    items.push_back(PayloadItem{ValueClass::EntityId,
                                std::to_string(rec.buyer_id)});
    items.push_back(PayloadItem{ValueClass::EntityId,
                                std::to_string(rec.seller_id)});
    items.insert(items.end(), 3 + rec.ct_alpha_sum.size() +
                                  rec.ct_dr_alpha.size(),
                 PayloadItem{ValueClass::CiphertextData, ""});
  }
  // Buyer d_max and preference weights travel to the cloud alongside the
  // pair grid; they stay ciphertexts until decrypted there.
  for (std::int64_t id : active_buyer_submissions()) {
    const auto& profile = proxy_.stored(protocol::Role::Buyer, id);
    bytes += ct_wire_bytes(*profile.ct_dmax);
    items.push_back(PayloadItem{ValueClass::EntityId, std::to_string(id)});
    items.insert(items.end(), 1 + profile.ct_weights.size(),
                 PayloadItem{ValueClass::CiphertextData, ""});
    for (const auto& ct : profile.ct_weights) {
      bytes += ct_wire_bytes(ct);
    }
  }
  log_message("ciphertext-processing", "proxy", "cloud",
              "pair-grid+buyer-meta", bytes, std::move(items));
  phase_ = Phase::Processed;
  return pair_records_;
}

std::vector<std::int64_t> ProtocolRun::active_buyer_submissions() const {
  // Only ids actually submitted this round exist in the proxy store.
  std::vector<std::int64_t> out;
  for (const auto& [id, _] : buyer_pool_) {
    if (proxy_.has(protocol::Role::Buyer, id)) {
      out.push_back(id);
    }
  }
  return out;
}

const std::vector<matching::MatchResult>& ProtocolRun::cloud_phase() {
  require_phase(Phase::Processed, "cloud_phase");
  round_pairs_plain_.clear();
  for (const auto& rec : pair_records_) {
    round_pairs_plain_.push_back(cloud_.decrypt_pair(rec, counters_.cloud));
  }
  std::vector<std::int64_t> buyer_order = active_buyer_submissions();
  std::map<std::int64_t, matching::BuyerMeta> meta;
  for (std::int64_t id : buyer_order) {
    meta[id] = cloud_.decrypt_buyer_meta(
        proxy_.stored(protocol::Role::Buyer, id), counters_.cloud);
  }
  round_matches_ =
      matching::run_round_matching(buyer_order, round_pairs_plain_, meta,
                                   cfg_.policy, round_, &counters_.cloud);
  for (const auto& m : round_matches_) {
    log_message("match-notify", "cloud",
                entity_name(protocol::Role::Buyer, m.buyer_id),
                "match-request",
                16,
                {PayloadItem{ValueClass::EntityId,
                             std::to_string(m.buyer_id)},
                 PayloadItem{ValueClass::EntityId,
                             std::to_string(m.seller_id)}});
    log_message("match-notify", "cloud",
                entity_name(protocol::Role::Seller, m.seller_id),
                "match-request",
                16,
                {PayloadItem{ValueClass::EntityId,
                             std::to_string(m.seller_id)},
                 PayloadItem{ValueClass::EntityId,
                             std::to_string(m.buyer_id)}});
  }
  phase_ = Phase::Matched;
  return round_matches_;
}

ReturnPackage ProtocolRun::build_return_package(
    const matching::MatchResult& match, protocol::Role recipient_role) {
  ReturnPackage pkg;
  pkg.recipient_role = recipient_role;
  if (recipient_role == protocol::Role::Buyer) {
    pkg.recipient_id = match.buyer_id;
    pkg.counterparty_id = match.seller_id;
    const auto& counterparty =
        proxy_.stored(protocol::Role::Seller, match.seller_id);
    pkg.ct_loc_x = counterparty.ct_x;
    pkg.ct_loc_y = counterparty.ct_y;
    pkg.ct_price = counterparty.ct_price;
  } else {
    pkg.recipient_id = match.seller_id;
    pkg.counterparty_id = match.buyer_id;
    const auto& counterparty =
        proxy_.stored(protocol::Role::Buyer, match.buyer_id);
    pkg.ct_loc_x = counterparty.ct_x;
    pkg.ct_loc_y = counterparty.ct_y;
  }
  return pkg;
}

void ProtocolRun::deliver_return_package(const ReturnPackage& pkg,
                                         const KeyPair& personal) {
  matching::OpCounters& counters = pkg.recipient_role == protocol::Role::Buyer
                                       ? counters_.buyers
                                       : counters_.sellers;
  auto [p, q] = decrypt_sk_chunks(pkg.ct_sk, personal, pkg.prime_width,
                                  &counters);
  KeyPair rebuilt = paillier::keypair_from_primes_with_g(p, q, round_pk().g());
  if (rebuilt.pk.key_id() != round_pk().key_id()) {
    throw paillier::KeyMismatchError(
        "recovered round key does not match the broadcast public key");
  }
  RecoveredCounterparty rec;
  rec.counterparty_id = pkg.counterparty_id;
  auto dec = [&](const Ciphertext& ct) {
    BigInt m = paillier::decrypt_standard(rebuilt.sk, rebuilt.pk, ct);
    ++counters.decryptions;
    return paillier::decode_signed_i64(rebuilt.pk, m);
  };
  rec.x = dec(pkg.ct_loc_x);
  rec.y = dec(pkg.ct_loc_y);
  if (pkg.ct_price.has_value()) {
    rec.price = dec(*pkg.ct_price);
  }
  if (pkg.recipient_role == protocol::Role::Buyer) {
    buyer_recovered_[pkg.recipient_id] = rec;
  } else {
    seller_recovered_[pkg.recipient_id] = rec;
  }
}

void ProtocolRun::result_return() {
  require_phase(Phase::Matched, "result_return");
  for (const auto& match : round_matches_) {
    for (protocol::Role role : {protocol::Role::Buyer,
                                protocol::Role::Seller}) {
      std::int64_t recipient =
          role == protocol::Role::Buyer ? match.buyer_id : match.seller_id;
      std::string name = entity_name(role, recipient);
      // Matched users generate personal keypairs with the parameter-
      // optimized scheme and upload the public part.
      KeyPair personal =
          paillier::keygen(cfg_.key_bits, paillier::GMode::NPlusOne, rng_);
      log_message("personal-key-upload", name, "cloud",
                  "personal-public-key", pk_wire_bytes(personal.pk),
                  {PayloadItem{ValueClass::PublicKeyMaterial, ""}});
      ReturnPackage pkg = build_return_package(match, role);
      pkg.ct_sk = cloud_.encrypt_round_sk(personal.pk, rng_, counters_.cloud,
                                          pkg.prime_width);
      std::vector<PayloadItem> cloud_items{
          PayloadItem{ValueClass::EntityId, std::to_string(recipient)},
          PayloadItem{ValueClass::Metadata, std::to_string(pkg.prime_width)}};
      cloud_items.insert(cloud_items.end(), pkg.ct_sk.size(),
                         PayloadItem{ValueClass::EncryptedKeyChunk, ""});
      std::size_t sk_bytes = 0;
      for (const auto& ct : pkg.ct_sk) {
        sk_bytes += ct_wire_bytes(ct);
      }
      log_message("result-package", "cloud", "proxy",
                  "matched-result+encrypted-round-key", sk_bytes + 12,
                  std::move(cloud_items));

      std::vector<PayloadItem> return_items{
          PayloadItem{ValueClass::EntityId,
                      std::to_string(pkg.counterparty_id)},
          PayloadItem{ValueClass::Metadata, std::to_string(pkg.prime_width)}};
      return_items.insert(return_items.end(), pkg.ct_sk.size(),
                          PayloadItem{ValueClass::EncryptedKeyChunk, ""});
      return_items.insert(return_items.end(),
                          pkg.ct_price.has_value() ? 3 : 2,
                          PayloadItem{ValueClass::CiphertextData, ""});
      log_message("return-delivery", "proxy", name, "return-package",
                  pkg.wire_bytes(), std::move(return_items), true);

      deliver_return_package(pkg, personal);
    }
  }
  phase_ = Phase::Returned;
}

RoundOutcome ProtocolRun::close_round() {
  require_phase(Phase::Returned, "close_round");
  RoundOutcome outcome;
  outcome.round = round_;
  outcome.active_buyers = static_cast<int>(proxy_.buyer_count());
  outcome.active_sellers = static_cast<int>(proxy_.seller_count());
  outcome.k = scenario_.k;
  outcome.round_key_id = proxy_.round_key_id();
  outcome.matches = round_matches_;
  outcome.decrypted_pairs = round_pairs_plain_;
  outcome.counters = counters_;
  for (const auto& m : round_matches_) {
    buyer_pool_.erase(m.buyer_id);
    seller_pool_.erase(m.seller_id);
  }
  proxy_.close();
  cloud_.close();
  ca_issued_.reset();
  phase_ = Phase::Idle;
  history_.push_back(outcome);
  return outcome;
}

RunReport ProtocolRun::run_all() {
  RunReport report;
  while (static_cast<int>(history_.size()) < cfg_.max_rounds) {
    if (!open_round()) {
      break;
    }
    submit_all();
    proxy_phase();
    cloud_phase();
    result_return();
    RoundOutcome outcome = close_round();
    if (outcome.matches.empty()) {
      break;
    }
  }
  for (const auto& outcome : history_) {
    report.matches.insert(report.matches.end(), outcome.matches.begin(),
                          outcome.matches.end());
  }
  report.rounds = history_;
  report.unmatched_buyers = active_buyers();
  return report;
}

// ---------------------------------------------------------------------------
// Audits

AuditReport check_run_invariants(const ProtocolRun& run) {
  AuditReport report;
  auto fail = [&](const std::string& what) {
    report.violations.push_back(what);
  };
  const protocol::Scenario& scenario = run.scenario();

  std::set<std::uint64_t> key_ids;
  std::set<std::int64_t> matched_sellers;
  std::set<std::int64_t> matched_buyers;
  for (const RoundOutcome& r : run.history()) {
    const std::int64_t i = r.active_buyers;
    const std::int64_t j = r.active_sellers;
    const std::int64_t k = r.k;
    const std::int64_t per_pair = 2 * k + 3;
    if (!key_ids.insert(r.round_key_id).second) {
      fail("round key repeated across rounds");
    }
    if (r.counters.proxy.decryptions != 0) {
      fail("proxy performed a decryption");
    }
    if (r.counters.proxy.he_ops() != i * j * per_pair) {
      fail("proxy homomorphic op count != I*J*(2k+3) in round " +
           std::to_string(r.round));
    }
    if (r.counters.proxy.he_adds != i * j * k ||
        r.counters.proxy.he_subs != i * j * (k + 3)) {
      fail("proxy add/sub split mismatch in round " + std::to_string(r.round));
    }
    if (r.counters.cloud.decryptions != i * j * per_pair + i * (3 + k)) {
      fail("cloud decryption count != I*J*(2k+3) + I*(3+k) in round " +
           std::to_string(r.round));
    }
    std::int64_t expected_entity_encs = i * (6 + 3 * k) + j * (3 + 2 * k);
    if (r.counters.entities().encryptions != expected_entity_encs) {
      fail("entity encryption count != I*(6+3k) + J*(3+2k) in round " +
           std::to_string(r.round));
    }
    if (r.counters.cloud.matchings !=
        static_cast<std::int64_t>(r.matches.size())) {
      fail("matching counter does not equal match count in round " +
           std::to_string(r.round));
    }

    for (const auto& m : r.matches) {
      if (!matched_sellers.insert(m.seller_id).second) {
        fail("seller " + std::to_string(m.seller_id) + " matched twice");
      }
      if (!matched_buyers.insert(m.buyer_id).second) {
        fail("buyer " + std::to_string(m.buyer_id) + " matched twice");
      }
      const protocol::DecryptedPair* pair = nullptr;
      for (const auto& p : r.decrypted_pairs) {
        if (p.buyer_id == m.buyer_id && p.seller_id == m.seller_id) {
          pair = &p;
          break;
        }
      }
      if (pair == nullptr) {
        fail("match without a decrypted pair");
        continue;
      }
      const protocol::BuyerRequest* buyer = nullptr;
      for (const auto& b : scenario.buyers) {
        if (b.id == m.buyer_id) {
          buyer = &b;
        }
      }
      if (buyer == nullptr) {
        fail("match references an unknown buyer");
        continue;
      }
      if (!matching::distance_ok(*pair, buyer->d_max)) {
        fail("matched pair violates the distance gate");
      }
      if (!matching::demand_ok(pair->alpha_sum, pair->dr_alpha,
                               run.config().policy)) {
        fail("matched pair violates the demand gate");
      }
      if (matching::matching_index(*pair, buyer->weights) != m.w_index) {
        fail("reported w_index does not recompute");
      }
    }
  }

  // Return fidelity: both parties of every match recover the counterparty's
  // exact plaintext; unmatched entities received nothing.
  auto scenario_buyer = [&](std::int64_t id) -> const protocol::BuyerRequest* {
    for (const auto& b : scenario.buyers) {
      if (b.id == id) return &b;
    }
    return nullptr;
  };
  auto scenario_seller = [&](std::int64_t id) -> const protocol::SellerOffer* {
    for (const auto& s : scenario.sellers) {
      if (s.id == id) return &s;
    }
    return nullptr;
  };
  for (const RoundOutcome& r : run.history()) {
    for (const auto& m : r.matches) {
      const auto* buyer = scenario_buyer(m.buyer_id);
      const auto* seller = scenario_seller(m.seller_id);
      const auto& at_buyer = run.recovered_by_buyer(m.buyer_id);
      const auto& at_seller = run.recovered_by_seller(m.seller_id);
      if (!at_buyer.has_value() || !at_seller.has_value()) {
        fail("matched party missing its return package");
        continue;
      }
      if (buyer == nullptr || seller == nullptr) {
        continue;  // already reported above
      }
      if (at_buyer->counterparty_id != seller->id ||
          at_buyer->x != seller->x || at_buyer->y != seller->y ||
          !at_buyer->price.has_value() || *at_buyer->price != seller->price) {
        fail("buyer recovered wrong counterparty data");
      }
      if (at_seller->counterparty_id != buyer->id ||
          at_seller->x != buyer->x || at_seller->y != buyer->y ||
          at_seller->price.has_value()) {
        fail("seller recovered wrong counterparty data");
      }
    }
  }
  for (const auto& b : scenario.buyers) {
    if (matched_buyers.count(b.id) == 0 &&
        run.recovered_by_buyer(b.id).has_value()) {
      fail("unmatched buyer received a return package");
    }
  }
  for (const auto& s : scenario.sellers) {
    if (matched_sellers.count(s.id) == 0 &&
        run.recovered_by_seller(s.id).has_value()) {
      fail("unmatched seller received a return package");
    }
  }
  return report;
}

AuditReport audit_message_log(const protocol::Scenario& scenario,
                              const MessageLog& log) {
  AuditReport report;
  std::set<std::string> profile_tokens;
  auto add = [&](std::int64_t v) {
    profile_tokens.insert(std::to_string(v));
  };
  for (const auto& b : scenario.buyers) {
    add(b.x);
    add(b.y);
    add(b.price);
    add(b.d_max);
    for (std::int64_t v : b.demand_prices) add(v);
    add(b.weights.w_d);
    add(b.weights.w_r);
    for (std::int64_t v : b.weights.w_alpha) add(v);
  }
  for (const auto& s : scenario.sellers) {
    add(s.x);
    add(s.y);
    add(s.price);
    for (std::int64_t v : s.demand_prices) add(v);
  }

  for (const MessageRecord& rec : log.records()) {
    if (rec.return_delivery) {
      continue;
    }
    for (const PayloadItem& item : rec.items) {
      if (item.cls != ValueClass::PlainNumber) {
        continue;
      }
      report.violations.push_back("plain number on the wire in step '" +
                                  rec.step + "'");
      if (profile_tokens.count(item.token) > 0) {
        report.violations.push_back("profile field value '" + item.token +
                                    "' leaked in step '" + rec.step + "'");
      }
    }
  }
  return report;
}

}  // namespace ppcharge::orchestrator
