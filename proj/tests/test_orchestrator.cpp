#include <doctest.h>

#include <set>
#include <sstream>

#include "ppcharge/oracle.hpp"
#include "ppcharge/orchestrator.hpp"
#include "ppcharge/scenario_gen.hpp"

using namespace ppcharge;
using namespace ppcharge::orchestrator;

namespace {

protocol::Scenario small_scenario(std::uint64_t seed = 7, int buyers = 2,
                                  int sellers = 3, int k = 2) {
  bench::ScenarioConfig cfg;
  cfg.buyers = buyers;
  cfg.sellers = sellers;
  cfg.k = k;
  cfg.seed = seed;
  return bench::gen_scenario(cfg);
}

ProtocolConfig fast_config(std::uint64_t seed = 1) {
  ProtocolConfig cfg;
  cfg.key_bits = 128;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("consecutive rounds use fresh keys and the proxy stays blind") {
  ProtocolRun run(small_scenario(), fast_config());
  REQUIRE(run.open_round());
  std::uint64_t key1 = run.proxy().round_key_id();
  CHECK(key1 == run.round_pk().key_id());
  run.submit_all();
  run.proxy_phase();
  run.cloud_phase();
  run.result_return();
  RoundOutcome r1 = run.close_round();
  CHECK(r1.round_key_id == key1);
  CHECK(r1.counters.proxy.decryptions == 0);
  CHECK(r1.counters.proxy.encryptions == 0);
  if (run.open_round()) {
    CHECK(run.proxy().round_key_id() != key1);
  }
}

TEST_CASE("proxy stores only ciphertexts plus the plaintext id") {
  ProtocolRun run(small_scenario(), fast_config());
  REQUIRE(run.open_round());
  run.submit_all();
  const protocol::EncryptedProfile& stored =
      run.proxy().stored(protocol::Role::Buyer, 1);
  CHECK(stored.id == 1);
  CHECK(stored.ct_x.key_id == run.round_pk().key_id());
  CHECK(stored.ct_dmax.has_value());
  CHECK(stored.ct_weights.size() == 2 + 2);
  // Replacement on resubmission.
  protocol::BuyerRequest again = run.scenario().buyers[0];
  BigInt old_ct = stored.ct_x.c;
  run.submit_buyer(again);
  CHECK(run.proxy().stored(protocol::Role::Buyer, 1).ct_x.c != old_ct);
  CHECK(run.proxy().buyer_count() == run.scenario().buyers.size());
}

TEST_CASE("lifecycle: submissions only while the round is open") {
  ProtocolRun run(small_scenario(), fast_config());
  CHECK_THROWS_AS(run.submit_all(), LifecycleError);
  REQUIRE(run.open_round());
  run.submit_all();
  run.proxy_phase();
  CHECK_THROWS_AS(run.submit_buyer(run.scenario().buyers[0]),
                  LifecycleError);
  CHECK_THROWS_AS(run.proxy_phase(), LifecycleError);
  run.cloud_phase();
  CHECK_THROWS_AS(run.cloud_phase(), LifecycleError);
  run.result_return();
  run.close_round();
  CHECK_THROWS_AS(run.close_round(), LifecycleError);
}

TEST_CASE("malformed submissions are rejected") {
  ProtocolRun run(small_scenario(), fast_config());
  REQUIRE(run.open_round());
  protocol::BuyerRequest bad = run.scenario().buyers[0];
  bad.demands = {0, 0};
  bad.demand_prices = {500, 0};  // price without the demand bit
  CHECK_THROWS_AS(run.submit_buyer(bad), protocol::SchemaError);
  protocol::SellerOffer off_map = run.scenario().sellers[0];
  off_map.x = run.scenario().area_size + 1;
  CHECK_THROWS_AS(run.submit_seller(off_map), protocol::SchemaError);
}

TEST_CASE("ciphertexts from a previous round are rejected everywhere") {
  protocol::Scenario scenario = small_scenario();
  ProtocolRun run(scenario, fast_config());
  REQUIRE(run.open_round());
  Rng rng(5);
  protocol::EncryptedProfile stale =
      protocol::encrypt_buyer(run.round_pk(), scenario.buyers[0], rng);
  run.submit_all();
  run.proxy_phase();
  run.cloud_phase();
  run.result_return();
  run.close_round();
  REQUIRE(run.open_round());
  CHECK_THROWS_AS(run.register_with_proxy(stale),
                  paillier::KeyMismatchError);
}

TEST_CASE("proxy phase: pair grid size and exact op counts") {
  // I=2, J=3, k=2: 6 pair records, 6 * 7 = 42 homomorphic operations.
  ProtocolRun run(small_scenario(7, 2, 3, 2), fast_config());
  REQUIRE(run.open_round());
  run.submit_all();
  const auto& pairs = run.proxy_phase();
  CHECK(pairs.size() == 6);
  CHECK(run.counters().proxy.he_ops() == 42);
  CHECK(run.counters().proxy.he_adds == 12);
  CHECK(run.counters().proxy.he_subs == 30);
  CHECK(run.counters().proxy.decryptions == 0);
  CHECK(run.counters().buyers.encryptions == 2 * (6 + 3 * 2));
  CHECK(run.counters().sellers.encryptions == 3 * (3 + 2 * 2));
}

TEST_CASE("proxy op count at I=3, J=4, k=2") {
  ProtocolRun run(small_scenario(8, 3, 4, 2), fast_config());
  REQUIRE(run.open_round());
  run.submit_all();
  run.proxy_phase();
  CHECK(run.counters().proxy.he_ops() == 84);  // 3*4*(2*2+3)
}

TEST_CASE("cloud phase decrypts exactly the cost-model count") {
  ProtocolRun run(small_scenario(7, 2, 3, 2), fast_config());
  REQUIRE(run.open_round());
  run.submit_all();
  run.proxy_phase();
  run.cloud_phase();
  // I*J*(2k+3) + I*(3+k) = 42 + 10
  CHECK(run.counters().cloud.decryptions == 52);
  // The cloud sees only differences, sums and buyer metadata -- never an
  // absolute location or price.
  std::set<std::string> allowed{"pair.dx",       "pair.dy",
                                "pair.dr",       "pair.alpha_sum",
                                "pair.dr_alpha", "buyer.d_max",
                                "buyer.w_d",     "buyer.w_r",
                                "buyer.w_alpha"};
  CHECK(!run.cloud().decrypted_log().empty());
  for (const auto& entry : run.cloud().decrypted_log()) {
    CHECK(allowed.count(entry.kind) == 1);
  }
}

TEST_CASE("empty scenario still runs one degenerate round") {
  protocol::Scenario empty;
  empty.area_size = 3000;
  empty.k = 2;
  ProtocolRun run(empty, fast_config());
  RunReport report = run.run_all();
  CHECK(report.rounds.size() == 1);
  CHECK(report.matches.empty());
  CHECK(report.rounds[0].counters.proxy.he_ops() == 0);
  CHECK(report.rounds[0].counters.cloud.decryptions == 0);
  CHECK(report.rounds[0].counters.entities().encryptions == 0);
}

TEST_CASE("sellers without buyers: encryptions happen, nothing else") {
  ProtocolRun run(small_scenario(7, 0, 3, 1), fast_config());
  RunReport report = run.run_all();
  CHECK(report.rounds.size() == 1);
  CHECK(report.rounds[0].counters.sellers.encryptions == 3 * 5);
  CHECK(report.rounds[0].counters.cloud.decryptions == 0);
  CHECK(report.matches.empty());
}

TEST_CASE("matched parties recover the counterparty plaintext exactly") {
  protocol::Scenario scenario = small_scenario(21, 3, 3, 1);
  ProtocolRun run(scenario, fast_config(3));
  RunReport report = run.run_all();
  REQUIRE(!report.matches.empty());
  for (const auto& m : report.matches) {
    const auto& at_buyer = run.recovered_by_buyer(m.buyer_id);
    const auto& at_seller = run.recovered_by_seller(m.seller_id);
    REQUIRE(at_buyer.has_value());
    REQUIRE(at_seller.has_value());
    const protocol::SellerOffer* seller = nullptr;
    const protocol::BuyerRequest* buyer = nullptr;
    for (const auto& s : scenario.sellers) {
      if (s.id == m.seller_id) seller = &s;
    }
    for (const auto& b : scenario.buyers) {
      if (b.id == m.buyer_id) buyer = &b;
    }
    CHECK(at_buyer->x == seller->x);
    CHECK(at_buyer->y == seller->y);
    CHECK(at_buyer->price == seller->price);
    CHECK(at_buyer->counterparty_id == m.seller_id);
    CHECK(at_seller->x == buyer->x);
    CHECK(at_seller->y == buyer->y);
    CHECK(!at_seller->price.has_value());
  }
  // Unmatched entities received nothing.
  std::set<std::int64_t> matched_buyers, matched_sellers;
  for (const auto& m : report.matches) {
    matched_buyers.insert(m.buyer_id);
    matched_sellers.insert(m.seller_id);
  }
  for (const auto& b : scenario.buyers) {
    if (matched_buyers.count(b.id) == 0) {
      CHECK(!run.recovered_by_buyer(b.id).has_value());
    }
  }
  for (const auto& s : scenario.sellers) {
    if (matched_sellers.count(s.id) == 0) {
      CHECK(!run.recovered_by_seller(s.id).has_value());
    }
  }
}

TEST_CASE("round key transport round-trips through chunking") {
  Rng rng(11);
  for (unsigned round_bits : {128u, 256u}) {
    for (unsigned personal_bits : {64u, 128u}) {
      paillier::KeyPair round =
          paillier::keygen(round_bits, paillier::GMode::RandomG, rng);
      paillier::KeyPair personal =
          paillier::keygen(personal_bits, paillier::GMode::NPlusOne, rng);
      unsigned width = 0;
      auto bytes = serialize_round_sk(round.sk, width);
      CHECK(bytes.size() == 2 * width);
      auto chunks = encrypt_sk_chunks(bytes, personal.pk, rng);
      CHECK(chunks.size() >= 2);
      matching::OpCounters counters;
      auto [p, q] = decrypt_sk_chunks(chunks, personal, width, &counters);
      CHECK(p == round.sk.p());
      CHECK(q == round.sk.q());
      CHECK(counters.decryptions ==
            static_cast<std::int64_t>(chunks.size()));
      // The recovered primes rebuild a key that decrypts round traffic.
      paillier::KeyPair rebuilt =
          paillier::keypair_from_primes_with_g(p, q, round.pk.g());
      CHECK(rebuilt.pk.key_id() == round.pk.key_id());
      paillier::Ciphertext ct =
          paillier::encrypt_standard(round.pk, 1234 % round.pk.n(), rng);
      CHECK(paillier::decrypt_standard(rebuilt.sk, rebuilt.pk, ct) ==
            1234 % round.pk.n());
    }
  }
}

TEST_CASE("multi-round run matches the multi-round oracle exactly") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 14ULL, 35ULL}) {
    protocol::Scenario scenario = small_scenario(seed, 5, 4, 2);
    for (matching::DemandMode mode : {matching::DemandMode::Relaxed,
                                      matching::DemandMode::Strict}) {
      ProtocolConfig cfg = fast_config(seed * 31 + 1);
      cfg.policy = matching::DemandPolicy{mode};
      ProtocolRun run(scenario, cfg);
      RunReport report = run.run_all();
      oracle::RunOutcome expected = oracle::match_all(scenario, cfg.policy);
      CHECK(report.matches == expected.matches);
      CHECK(report.unmatched_buyers == expected.unmatched_buyers);
      CHECK(static_cast<int>(report.rounds.size()) == expected.rounds);
    }
  }
}

TEST_CASE("re-running a scenario with the same seed reproduces history") {
  protocol::Scenario scenario = small_scenario(42, 4, 4, 2);
  ProtocolConfig cfg = fast_config(99);
  ProtocolRun run_a(scenario, cfg);
  ProtocolRun run_b(scenario, cfg);
  RunReport a = run_a.run_all();
  RunReport b = run_b.run_all();
  CHECK(a.matches == b.matches);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].round_key_id == b.rounds[i].round_key_id);
    CHECK(a.rounds[i].counters.cloud.decryptions ==
          b.rounds[i].counters.cloud.decryptions);
    CHECK(a.rounds[i].decrypted_pairs == b.rounds[i].decrypted_pairs);
  }
  CHECK(run_a.log().records().size() == run_b.log().records().size());
}

TEST_CASE("after all sellers match, the next round refuses to open") {
  // One buyer, one adjacent seller: the single round matches everyone.
  protocol::Scenario s;
  s.area_size = 100;
  s.k = 0;
  protocol::BuyerRequest b;
  b.id = 1;
  b.x = 10;
  b.y = 10;
  b.price = 50;
  b.d_max = 99;
  b.weights = protocol::PreferenceWeights{1000, 0, {}};
  s.buyers = {b};
  protocol::SellerOffer o;
  o.id = 1;
  o.x = 12;
  o.y = 10;
  o.price = 40;
  s.sellers = {o};
  ProtocolRun run(s, fast_config());
  RunReport report = run.run_all();
  CHECK(report.matches.size() == 1);
  CHECK(run.active_sellers().empty());
  CHECK(!run.open_round());
}

TEST_CASE("run invariants hold on randomized scenarios") {
  for (std::uint64_t seed : {3ULL, 8ULL, 19ULL}) {
    protocol::Scenario scenario = small_scenario(seed, 4, 5, 3);
    ProtocolRun run(scenario, fast_config(seed));
    run.run_all();
    AuditReport audit = check_run_invariants(run);
    for (const auto& v : audit.violations) {
      FAIL_CHECK(v);
    }
    CHECK(audit.ok());
  }
}

TEST_CASE("message log records the full conversation, no plaintext") {
  protocol::Scenario scenario = small_scenario(5, 2, 2, 1);
  ProtocolRun run(scenario, fast_config(5));
  run.run_all();
  const auto& records = run.log().records();
  REQUIRE(!records.empty());
  // Every step of the protocol shows up.
  std::set<std::string> steps;
  for (const auto& rec : records) {
    steps.insert(rec.step);
    CHECK(rec.bytes > 0);
  }
  CHECK(steps.count("key-issue") == 1);
  CHECK(steps.count("submission") == 1);
  CHECK(steps.count("ciphertext-processing") == 1);
  AuditReport audit = audit_message_log(scenario, run.log());
  for (const auto& v : audit.violations) {
    FAIL_CHECK(v);
  }
  CHECK(audit.ok());
  // Line export format: round,step,sender,receiver,kind,bytes.
  std::ostringstream out;
  run.log().write(out);
  std::string first_line = out.str().substr(0, out.str().find('\n'));
  CHECK(first_line.find("1,key-issue,ca,") == 0);
}

TEST_CASE("the log audit actually catches a planted plaintext value") {
  protocol::Scenario scenario = small_scenario(5, 1, 1, 0);
  MessageLog log;
  MessageRecord rec;
  rec.round = 1;
  rec.step = "submission";
  rec.sender = "buyer:1";
  rec.receiver = "proxy";
  rec.payload_kind = "leaky";
  rec.bytes = 8;
  rec.items.push_back(PayloadItem{
      ValueClass::PlainNumber, std::to_string(scenario.buyers[0].x)});
  log.append(rec);
  AuditReport audit = audit_message_log(scenario, log);
  CHECK(audit.violations.size() == 2);  // plain number + leaked value
  // The same item inside a return delivery is not flagged.
  MessageLog ok_log;
  rec.return_delivery = true;
  ok_log.append(rec);
  CHECK(audit_message_log(scenario, ok_log).ok());
}

TEST_CASE("unmatched buyers re-enter the following round") {
  // Two buyers, one seller both can reach: round 1 matches buyer 1, buyer 2
  // stays in the pool but the seller pool is drained, so the run ends with
  // buyer 2 unmatched.
  protocol::Scenario s;
  s.area_size = 100;
  s.k = 0;
  for (std::int64_t id : {1, 2}) {
    protocol::BuyerRequest b;
    b.id = id;
    b.x = 10;
    b.y = 10 * id;
    b.price = 50;
    b.d_max = 99;
    b.weights = protocol::PreferenceWeights{1000, 0, {}};
    s.buyers.push_back(b);
  }
  protocol::SellerOffer o;
  o.id = 1;
  o.x = 11;
  o.y = 10;
  o.price = 40;
  s.sellers = {o};
  ProtocolRun run(s, fast_config());
  RunReport report = run.run_all();
  CHECK(report.matches.size() == 1);
  CHECK(report.matches[0].buyer_id == 1);
  CHECK(report.unmatched_buyers == std::vector<std::int64_t>{2});
}
