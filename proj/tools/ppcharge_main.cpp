// Command-line front end: scenario generation, full-protocol simulation,
// oracle verification, crypto micro-benchmarks and cost-model counter
// checks. Exit codes: 0 success, 1 invariant or verification failure,
// 2 usage error (bad flags, unreadable or malformed input).

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ppcharge/bench.hpp"
#include "ppcharge/matching.hpp"
#include "ppcharge/oracle.hpp"
#include "ppcharge/orchestrator.hpp"
#include "ppcharge/protocol.hpp"
#include "ppcharge/scenario_gen.hpp"

namespace {

using namespace ppcharge;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
  unsigned bits = 512;
  std::uint64_t seed = 1;
  std::string policy = "relaxed";
  std::string out;
  std::string format = "text";
};

matching::DemandPolicy parse_policy(const std::string& name) {
  if (name == "strict") {
    return matching::DemandPolicy{matching::DemandMode::Strict};
  }
  return matching::DemandPolicy{matching::DemandMode::Relaxed};
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw protocol::SchemaError("cannot write output file: " + path);
  }
  out << content;
}

std::string matches_csv(const std::vector<matching::MatchResult>& matches) {
  std::ostringstream out;
  out << "buyer_id,seller_id,w_index,round\n";
  for (const auto& m : matches) {
    out << m.buyer_id << ',' << m.seller_id << ',' << m.w_index << ','
        << m.round << '\n';
  }
  return out.str();
}

std::string counters_text(const orchestrator::RoundOutcome& r) {
  std::ostringstream out;
  auto line = [&](const char* role, const matching::OpCounters& c) {
    out << "  " << role << ": enc=" << c.encryptions << " he_add=" << c.he_adds
        << " he_sub=" << c.he_subs << " dec=" << c.decryptions
        << " match=" << c.matchings << '\n';
  };
  out << "round " << r.round << " (I=" << r.active_buyers
      << " J=" << r.active_sellers << " k=" << r.k << ")\n";
  line("buyers ", r.counters.buyers);
  line("sellers", r.counters.sellers);
  line("proxy  ", r.counters.proxy);
  line("cloud  ", r.counters.cloud);
  return out.str();
}

struct FormulaCheck {
  std::string metric;
  std::string formula;
  std::int64_t expected = 0;
  std::int64_t observed = 0;
  bool ok() const { return expected == observed; }
};

std::vector<FormulaCheck> table2_checks(const orchestrator::RoundOutcome& r) {
  const std::int64_t i = r.active_buyers;
  const std::int64_t j = r.active_sellers;
  const std::int64_t k = r.k;
  return {
      {"proxy_he_ops", "I*J*(2k+3)", i * j * (2 * k + 3),
       r.counters.proxy.he_ops()},
      {"cloud_decryptions", "I*J*(2k+3)+I*(3+k)",
       i * j * (2 * k + 3) + i * (3 + k), r.counters.cloud.decryptions},
      {"entity_encryptions", "I*(6+3k)+J*(3+2k)",
       i * (6 + 3 * k) + j * (3 + 2 * k),
       r.counters.entities().encryptions},
      {"proxy_decryptions", "0", 0, r.counters.proxy.decryptions},
  };
}

int cmd_gen(const bench::ScenarioConfig& cfg, const std::string& out_path) {
  protocol::Scenario scenario = bench::gen_scenario(cfg);
  std::ostringstream out;
  out << protocol::scenario_to_json(scenario).dump(2) << '\n';
  write_output(out_path, out.str());
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const CommonOpts& opts,
                 const std::string& log_path) {
  protocol::Scenario scenario = protocol::load_scenario(scenario_path);
  orchestrator::ProtocolConfig cfg;
  cfg.key_bits = opts.bits;
  cfg.policy = parse_policy(opts.policy);
  cfg.seed = opts.seed;
  orchestrator::ProtocolRun run(scenario, cfg);
  orchestrator::RunReport report = run.run_all();

  // The match list goes to --out as clean CSV; the counter table goes to
  // stdout (or joins the match list there when no --out is given).
  write_output(opts.out, matches_csv(report.matches));
  std::ostringstream body;
  if (opts.format == "text") {
    for (const auto& r : report.rounds) {
      body << counters_text(r);
    }
    if (!report.unmatched_buyers.empty()) {
      body << "unmatched buyers:";
      for (std::int64_t id : report.unmatched_buyers) {
        body << ' ' << id;
      }
      body << '\n';
    }
  } else {
    body << "round,role,encryptions,he_adds,he_subs,decryptions,matchings\n";
    for (const auto& r : report.rounds) {
      auto row = [&](const char* role, const matching::OpCounters& c) {
        body << r.round << ',' << role << ',' << c.encryptions << ','
             << c.he_adds << ',' << c.he_subs << ',' << c.decryptions << ','
             << c.matchings << '\n';
      };
      row("buyers", r.counters.buyers);
      row("sellers", r.counters.sellers);
      row("proxy", r.counters.proxy);
      row("cloud", r.counters.cloud);
    }
  }
  std::cout << body.str();

  if (!log_path.empty()) {
    std::ofstream log_out(log_path);
    if (!log_out) {
      throw protocol::SchemaError("cannot write message log: " + log_path);
    }
    run.log().write(log_out);
  }

  orchestrator::AuditReport invariants = orchestrator::check_run_invariants(run);
  orchestrator::AuditReport wire =
      orchestrator::audit_message_log(scenario, run.log());
  for (const auto& v : invariants.violations) {
    std::cerr << "invariant violation: " << v << '\n';
  }
  for (const auto& v : wire.violations) {
    std::cerr << "message-log violation: " << v << '\n';
  }
  return invariants.ok() && wire.ok() ? kExitOk : kExitFailure;
}

int cmd_verify(const std::string& scenario_path, const CommonOpts& opts) {
  protocol::Scenario scenario = protocol::load_scenario(scenario_path);
  orchestrator::ProtocolConfig cfg;
  cfg.key_bits = opts.bits;
  cfg.policy = parse_policy(opts.policy);
  cfg.seed = opts.seed;
  orchestrator::ProtocolRun run(scenario, cfg);
  orchestrator::RunReport report = run.run_all();
  oracle::RunOutcome expected = oracle::match_all(scenario, cfg.policy);

  std::ostringstream out;
  std::size_t diffs = 0;
  std::size_t n = std::max(report.matches.size(), expected.matches.size());
  for (std::size_t idx = 0; idx < n; ++idx) {
    const bool have_engine = idx < report.matches.size();
    const bool have_oracle = idx < expected.matches.size();
    if (have_engine && have_oracle &&
        report.matches[idx] == expected.matches[idx]) {
      continue;
    }
    ++diffs;
    out << "diff at entry " << idx << ": pipeline=";
    if (have_engine) {
      const auto& m = report.matches[idx];
      out << '(' << m.buyer_id << ',' << m.seller_id << ',' << m.w_index
          << ",r" << m.round << ')';
    } else {
      out << "(none)";
    }
    out << " oracle=";
    if (have_oracle) {
      const auto& m = expected.matches[idx];
      out << '(' << m.buyer_id << ',' << m.seller_id << ',' << m.w_index
          << ",r" << m.round << ')';
    } else {
      out << "(none)";
    }
    out << '\n';
  }
  if (diffs == 0) {
    out << "verify: pipeline and oracle agree (" << report.matches.size()
        << " matches)\n";
  } else {
    out << "verify: DIVERGENCE in " << diffs << " of " << n << " entries\n";
  }
  write_output(opts.out, out.str());
  return diffs == 0 ? kExitOk : kExitFailure;
}

int cmd_bench(const bench::BenchConfig& cfg, const CommonOpts& opts) {
  bench::BenchReport report = bench::bench_crypto(cfg);
  write_output(opts.out, opts.format == "csv" ? bench::to_csv(report)
                                              : bench::to_text(report));
  return kExitOk;
}

int cmd_counters(const std::string& scenario_path, const CommonOpts& opts) {
  protocol::Scenario scenario = protocol::load_scenario(scenario_path);
  orchestrator::ProtocolConfig cfg;
  cfg.key_bits = opts.bits;
  cfg.policy = parse_policy(opts.policy);
  cfg.seed = opts.seed;
  orchestrator::ProtocolRun run(scenario, cfg);
  orchestrator::RunReport report = run.run_all();

  std::ostringstream out;
  bool all_ok = true;
  if (opts.format == "csv") {
    out << "round,metric,formula,expected,observed,ok\n";
  }
  for (const auto& r : report.rounds) {
    if (opts.format == "text") {
      out << "round " << r.round << " (I=" << r.active_buyers
          << " J=" << r.active_sellers << " k=" << r.k << ")\n";
    }
    for (const FormulaCheck& check : table2_checks(r)) {
      all_ok = all_ok && check.ok();
      if (opts.format == "csv") {
        out << r.round << ',' << check.metric << ',' << check.formula << ','
            << check.expected << ',' << check.observed << ','
            << (check.ok() ? "yes" : "no") << '\n';
      } else {
        out << "  " << check.metric << " = " << check.observed
            << " expected " << check.formula << " = " << check.expected
            << (check.ok() ? "  ok" : "  MISMATCH") << '\n';
      }
    }
  }
  write_output(opts.out, out.str());
  return all_ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving shared-charging-pile matching"};
  app.require_subcommand(1);

  CommonOpts opts;
  bench::ScenarioConfig gen_cfg;
  bench::BenchConfig bench_cfg;
  std::string scenario_path;
  std::string log_path;

  auto add_common = [&](CLI::App* cmd, bool with_policy) {
    cmd->add_option("--bits", opts.bits, "Paillier key size in bits");
    cmd->add_option("--seed", opts.seed, "RNG seed");
    cmd->add_option("--out", opts.out, "output path (default stdout)");
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "text"}));
    if (with_policy) {
      cmd->add_option("--policy", opts.policy, "demand case-0 policy")
          ->check(CLI::IsMember({"strict", "relaxed"}));
    }
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a random scenario");
  gen->add_option("--buyers", gen_cfg.buyers, "buyer count I");
  gen->add_option("--sellers", gen_cfg.sellers, "seller count J");
  gen->add_option("-k,--demands", gen_cfg.k, "demand dimension k");
  gen->add_option("--area", gen_cfg.area, "area side length in meters");
  gen->add_option("--price-min", gen_cfg.price_range.lo, "");
  gen->add_option("--price-max", gen_cfg.price_range.hi, "");
  gen->add_option("--demand-price-min", gen_cfg.demand_price_range.lo, "");
  gen->add_option("--demand-price-max", gen_cfg.demand_price_range.hi, "");
  gen->add_option("--dmax-min", gen_cfg.d_max_range.lo, "");
  gen->add_option("--dmax-max", gen_cfg.d_max_range.hi, "");
  gen->add_option("--weight-min", gen_cfg.weight_range.lo, "");
  gen->add_option("--weight-max", gen_cfg.weight_range.hi, "");
  gen->add_option("--density", gen_cfg.demand_density,
                  "probability a demand bit is 1");
  gen->add_option("--seed", gen_cfg.seed, "RNG seed");
  gen->add_option("--out", opts.out, "output path (default stdout)");

  CLI::App* simulate =
      app.add_subcommand("simulate", "run the full encrypted pipeline");
  simulate->add_option("scenario", scenario_path, "scenario JSON file")
      ->required();
  simulate->add_option("--log", log_path, "write the message log here");
  add_common(simulate, true);

  CLI::App* verify = app.add_subcommand(
      "verify", "run pipeline and plaintext oracle, report any divergence");
  verify->add_option("scenario", scenario_path, "scenario JSON file")
      ->required();
  add_common(verify, true);

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "crypto micro-benchmarks");
  bench_cmd->add_option("--bits", bench_cfg.bits, "key size in bits");
  bench_cmd->add_option("--trials", bench_cfg.trials,
                        "timed iterations per repeat");
  bench_cmd->add_option("--warmup", bench_cfg.warmup,
                        "discarded iterations per repeat");
  bench_cmd->add_option("--repeats", bench_cfg.repeats,
                        "outer repetitions (median of medians)");
  bench_cmd->add_option("--seed", bench_cfg.seed, "RNG seed");
  bench_cmd->add_option("--out", opts.out, "output path (default stdout)");
  bench_cmd->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "text"}));

  CLI::App* counters = app.add_subcommand(
      "counters", "check cost-model formulas against a simulated run");
  counters->add_option("scenario", scenario_path, "scenario JSON file")
      ->required();
  add_common(counters, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen(gen_cfg, opts.out);
    }
    if (simulate->parsed()) {
      return cmd_simulate(scenario_path, opts, log_path);
    }
    if (verify->parsed()) {
      return cmd_verify(scenario_path, opts);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(bench_cfg, opts);
    }
    if (counters->parsed()) {
      return cmd_counters(scenario_path, opts);
    }
  } catch (const protocol::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
