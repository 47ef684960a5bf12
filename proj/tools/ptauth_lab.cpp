//===- ptauth_lab.cpp - Command-line driver ---------------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Exit status: 0 pass, 1 gate failure (or a non-clean run), 2 usage error.
//
//===----------------------------------------------------------------------===//

#include "ptauth/ptauth.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace ptauth;

namespace {

constexpr int kPass = 0;
constexpr int kGateFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string pac = "v83";
  std::string ac = "mixer";
  std::uint64_t seed = 1;
  std::string optimize = "on";
};

void add_common(CLI::App *cmd, CommonOpts &o) {
  cmd->add_option("--pac", o.pac, "Failure delivery: v83 (poison) or v86 (fault)")
      ->check(CLI::IsMember({"v83", "v86"}));
  cmd->add_option("--ac", o.ac, "AC function: xorfold or mixer")->check(CLI::IsMember({"xorfold", "mixer"}));
  cmd->add_option("--seed", o.seed, "Seed for keys, IDs and generators");
  cmd->add_option("--optimize", o.optimize, "Check elision: on or off")->check(CLI::IsMember({"on", "off"}));
}

RuntimeConfig runtime_config(const CommonOpts &o) {
  RuntimeConfig rc;
  rc.pac_mode = o.pac == "v86" ? PacMode::V86_Fault : PacMode::V83_Poison;
  rc.ac_function = o.ac == "xorfold" ? AcFunction::XorFold : AcFunction::KeyedMixer;
  rc.seed = o.seed;
  return rc;
}

std::string read_file(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ir::Program load_program(const std::string &path) {
  ir::ParseResult r = ir::parse_program(read_file(path));
  if (!r.ok()) {
    std::ostringstream msg;
    for (const auto &d : r.diagnostics)
      msg << path << ":" << ir::format(d) << "\n";
    throw UsageError(msg.str());
  }
  return std::move(r.program);
}

// Subcommands ------------------------------------------------------------------

int cmd_corpus(std::uint64_t seed, const std::vector<std::size_t> &counts, const std::string &out,
               const CommonOpts &o, bool all_configs) {
  CorpusCounts c{counts.at(0), counts.at(1), counts.at(2)};
  std::vector<CorpusCase> cases = gen_corpus(seed, c);
  if (!out.empty())
    write_corpus(out, cases);
  std::vector<RuntimeConfig> configs;
  if (all_configs) {
    for (PacMode pm : {PacMode::V83_Poison, PacMode::V86_Fault})
      for (AcFunction fn : {AcFunction::XorFold, AcFunction::KeyedMixer}) {
        RuntimeConfig rc = runtime_config(o);
        rc.pac_mode = pm;
        rc.ac_function = fn;
        configs.push_back(rc);
      }
  } else {
    configs.push_back(runtime_config(o));
  }
  bool ok = true;
  for (const RuntimeConfig &rc : configs) {
    CorpusRunConfig cfg{rc, o.optimize == "on"};
    CorpusSummary s = run_corpus(cases, cfg);
    std::cout << "== pac " << to_string(rc.pac_mode) << ", ac " << to_string(rc.ac_function) << ", optimize "
              << o.optimize << "\n";
    write_corpus_summary(std::cout, s);
    ok = ok && s.pass() && s.free_backward_steps == 0;
  }
  std::cout << (ok ? "PASS" : "FAIL") << " corpus (" << cases.size() << " cases)\n";
  return ok ? kPass : kGateFailure;
}

int cmd_run(const std::string &file, const std::string &mode, const CommonOpts &o, bool emit, bool sites,
            const std::string &trace, bool json) {
  ir::Program prog = load_program(file);
  RunOptions ro;
  ro.runtime = runtime_config(o);
  ro.mode = mode == "raw" ? ExecMode::Raw : ExecMode::Checked;
  ro.record_heap_events = !trace.empty();
  InstrumentOptions io;
  io.optimize = o.optimize == "on";
  InstrumentResult inst = instrument(prog, io);
  if (emit)
    ir::print_program(std::cout, inst.program);
  if (sites)
    std::cout << sites_to_json(inst.sites).dump(2) << "\n";
  RunReport rep = interpret(ro.mode == ExecMode::Raw ? prog : inst.program, ro);
  if (!trace.empty()) {
    std::ofstream t(trace);
    if (!t)
      throw UsageError("cannot write " + trace);
    for (const auto &e : rep.heap_events)
      t << to_json(e).dump() << "\n";
    t << to_json(rep).dump() << "\n";
  }
  if (json) {
    std::cout << to_json(rep).dump(2) << "\n";
  } else {
    std::cout << rep.output;
    std::cout << "verdict: " << to_string(rep.verdict.kind);
    if (rep.verdict.is_violation())
      std::cout << " " << to_string(rep.verdict.violation);
    if (!rep.verdict.clean())
      std::cout << " in " << rep.verdict.function << " at instruction " << rep.verdict.origin << " (event "
                << rep.verdict.event << ")";
    if (!rep.verdict.detail.empty())
      std::cout << ": " << rep.verdict.detail;
    std::cout << "\ninstructions " << rep.instructions_retired << ", checks " << rep.checks_executed
              << ", backward steps " << rep.backward_steps << ", cost " << rep.cost_units << ", peak bytes "
              << rep.peak_bytes << "\n";
    if (rep.return_value)
      std::cout << "return " << *rep.return_value << "\n";
  }
  return rep.verdict.clean() ? kPass : kGateFailure;
}

int cmd_bench(const std::string &suite, std::size_t reps, const std::string &out, const CommonOpts &o) {
  if (suite != "default")
    throw UsageError("unknown suite '" + suite + "'");
  BenchConfig cfg;
  cfg.runtime = runtime_config(o);
  cfg.reps = reps;
  std::vector<BenchResult> rs = run_bench(default_suite(), cfg);
  std::vector<GateResult> gates = bench_gates(rs);
  write_bench_text(std::cout, rs, gates);
  if (!out.empty()) {
    write_bench_reports(out, rs, gates);
    std::cout << "reports written to " << out << "\n";
  }
  for (const auto &g : gates)
    if (!g.pass)
      return kGateFailure;
  return kPass;
}

int cmd_audit(const std::string &file, std::size_t random, const CommonOpts &o) {
  AuditConfig cfg;
  cfg.run.runtime = runtime_config(o);
  if (!file.empty()) {
    AuditReport a = verdict_equivalence_audit(load_program(file), cfg);
    std::cout << (a.equivalent ? "PASS" : "FAIL") << " audit " << file << ": optimized "
              << to_string(a.optimized.kind) << ", unoptimized " << to_string(a.unoptimized.kind) << "; checks "
              << a.checks_optimized << " vs " << a.checks_unoptimized << "; sites elided " << a.sites_elided
              << "\n";
    if (!a.equivalent)
      std::cout << "  " << a.divergence << "\n";
    return a.equivalent ? kPass : kGateFailure;
  }
  std::size_t failures = 0;
  for (std::size_t i = 0; i < random; ++i) {
    std::uint64_t s = o.seed + i;
    AuditReport a = verdict_equivalence_audit(generate_program(s), cfg);
    if (!a.equivalent) {
      ++failures;
      std::cout << "FAIL seed " << s << ": " << a.divergence << "\n";
    }
  }
  std::cout << (failures ? "FAIL" : "PASS") << " audit of " << random << " generated programs, " << failures
            << " divergent\n";
  return failures ? kGateFailure : kPass;
}

int cmd_robustness(std::size_t per_kind, const CommonOpts &o) {
  CorpusRunConfig cfg{runtime_config(o), o.optimize == "on"};
  RobustnessSummary s = run_robustness(o.seed, per_kind, cfg);
  std::cout << "attacks detected " << s.detected << "/" << s.attacks << ", false positives " << s.false_positives
            << "/" << s.clean_cases << "\n";
  for (const auto &f : s.failures)
    std::cout << "MISMATCH " << f << "\n";
  std::cout << (s.pass() ? "PASS" : "FAIL") << " robustness\n";
  return s.pass() ? kPass : kGateFailure;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Points-to authentication lab: corpus, runs, benchmarks, audits"};
  app.require_subcommand(1);
  CommonOpts common;

  auto *corpus = app.add_subcommand("corpus", "Generate and score the temporal-bug corpus");
  std::vector<std::size_t> counts = {50, 50, 50};
  std::string corpus_out;
  bool single_config = false;
  add_common(corpus, common);
  corpus->add_option("--counts", counts, "Cases per category: uaf,double_free,invalid_free")
      ->delimiter(',')
      ->expected(3);
  corpus->add_option("--out", corpus_out, "Directory for the .ir files and manifest.json");
  corpus->add_flag("--single-config", single_config, "Only run the --pac/--ac configuration");

  auto *run = app.add_subcommand("run", "Run one IR program");
  std::string file, mode = "checked", trace;
  bool emit = false, sites = false, json = false;
  run->add_option("FILE", file, "IR program")->required();
  run->add_option("--mode", mode, "raw or checked")->check(CLI::IsMember({"raw", "checked"}));
  add_common(run, common);
  run->add_flag("--emit-instrumented", emit, "Print the instrumented program");
  run->add_flag("--check-sites", sites, "Print the check-site table as JSON");
  run->add_option("--trace", trace, "Write heap events and the run report as JSON lines");
  run->add_flag("--json", json, "Print the run report as JSON");

  auto *bench = app.add_subcommand("bench", "Run the overhead benchmark suite");
  std::string suite = "default", bench_out;
  std::size_t reps = 10;
  bench->add_option("--suite", suite, "Benchmark suite");
  bench->add_option("--reps", reps, "Repetitions per configuration")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Directory for bench.csv, bench.json, bench.txt");
  add_common(bench, common);

  auto *audit = app.add_subcommand("audit", "Compare optimized and unoptimized instrumentation");
  std::string audit_file;
  std::size_t random = 0;
  audit->add_option("FILE", audit_file, "IR program");
  audit->add_option("--random", random, "Audit this many generated programs instead of FILE");
  add_common(audit, common);

  auto *robust = app.add_subcommand("robustness", "Header-overwrite and ID-spray cases");
  std::size_t per_kind = 10;
  robust->add_option("--per-kind", per_kind, "Cases per attack kind")->check(CLI::PositiveNumber);
  add_common(robust, common);

  auto *gen = app.add_subcommand("generate", "Print a random program");
  GenOptions gopts;
  gen->add_option("--statements", gopts.statements, "Top-level statements");
  gen->add_option("--bug-rate", gopts.bug_rate, "Probability of an injected temporal bug");
  add_common(gen, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*corpus)
      return cmd_corpus(common.seed, counts, corpus_out, common, !single_config);
    if (*run)
      return cmd_run(file, mode, common, emit, sites, trace, json);
    if (*bench)
      return cmd_bench(suite, reps, bench_out, common);
    if (*audit) {
      if (audit_file.empty() && random == 0)
        throw UsageError("audit needs FILE or --random N");
      return cmd_audit(audit_file, random, common);
    }
    if (*robust)
      return cmd_robustness(per_kind, common);
    if (*gen) {
      std::cout << generate_program_text(common.seed, gopts);
      return kPass;
    }
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGateFailure;
  }
  return kUsage;
}
