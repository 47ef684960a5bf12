//===- instrumenter_test.cpp - Check insertion and safe-window elision ----===//

#include "ptauth/instrumenter.hpp"
#include "ptauth/parser.hpp"
#include "ptauth/progen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ptauth;

namespace {

ir::Program parse(const std::string &t) { return ir::parse_program_or_throw(t); }

const CheckSite &site_at(const InstrumentResult &r, const std::string &fn, std::size_t index,
                         SiteKind kind = SiteKind::Load) {
  for (const auto &s : r.sites)
    if (s.function == fn && s.index == index && s.kind == kind)
      return s;
  throw std::runtime_error("no site");
}

bool elided(const std::string &text, std::size_t index, SiteKind kind = SiteKind::Load,
            InstrumentOptions opts = {}) {
  return site_at(instrument(parse(text), opts), "main", index, kind).elided;
}

} // namespace

TEST(Instrument, PlacesChecksBeforeEveryDereference) {
  const char *t = R"(
fn main {
  p = alloc 32
  store [p], 1
  v = load [p + 8]
  extcall print_str(p)
  q = realloc p, 64
  free q
  ret v
}
)";
  InstrumentOptions off;
  off.optimize = false;
  InstrumentResult r = instrument(parse(t), off);
  const ir::Function &f = r.program.functions[0];
  std::vector<ir::Opcode> ops;
  for (const auto &in : f.body)
    ops.push_back(in.op);
  using O = ir::Opcode;
  std::vector<O> want = {O::Alloc, O::Check, O::Store, O::Check, O::Load, O::Check, O::ExtCall,
                         O::Realloc, O::Free, O::Ret};
  EXPECT_EQ(ops, want);
  EXPECT_EQ(r.sites.size(), 5u);
  EXPECT_EQ(r.inserted(), 3u);
  EXPECT_EQ(r.elided(), 0u);
  EXPECT_EQ(f.body[1].origin, 1u);
  EXPECT_EQ(f.body[7].origin, 4u);
}

TEST(Instrument, LabelsPointAtTheFirstInsertedCheck) {
  const char *t = "fn main(p) {\n  br l\nl:\n  v = load [p]\n  ret v\n}\n";
  InstrumentOptions off;
  off.optimize = false;
  InstrumentResult r = instrument(parse(t), off);
  const ir::Function &f = r.program.functions[0];
  EXPECT_EQ(f.body[f.label_index("l")].op, ir::Opcode::Check);
}

TEST(Instrument, RejectsAlreadyInstrumentedInput) {
  ir::ParseOptions o;
  o.allow_check = true;
  ir::Program p = ir::parse_program_or_throw("fn main {\n  p = alloc 8\n  check p\n  ret\n}\n", o);
  EXPECT_THROW(instrument(p), InstrumentError);
}

TEST(Instrument, OutputParsesBack) {
  ir::Program p = generate_program(4);
  ir::ParseOptions o;
  o.allow_check = true;
  InstrumentResult r = instrument(p);
  EXPECT_TRUE(ir::structurally_equal(r.program, ir::parse_program_or_throw(ir::to_text(r.program), o)));
}

TEST(SafeWindow, FreshAllocationIsSafe) {
  EXPECT_TRUE(elided("fn main {\n  p = alloc 32\n  v = load [p]\n  ret v\n}\n", 1));
}

TEST(SafeWindow, InteriorCopyOfFreshAllocationIsSafe) {
  EXPECT_TRUE(elided("fn main {\n  p = alloc 32\n  q = ptradd p, 8\n  v = load [q]\n  ret v\n}\n", 2));
}

TEST(SafeWindow, ParameterIsCheckedOnceThenSafe) {
  const char *t = "fn main(p) {\n  a = load [p]\n  b = load [p + 8]\n  ret b\n}\n";
  EXPECT_FALSE(elided(t, 0));
  EXPECT_TRUE(elided(t, 1));
}

TEST(SafeWindow, GlobalsAreAlwaysElided) {
  const char *t = "global g 16\nfn main {\n  q = globaddr g\n  call main()\n  v = load [q]\n  ret v\n}\n";
  InstrumentResult r = instrument(parse(t));
  EXPECT_EQ(site_at(r, "main", 2).reason, ElisionReason::Global);
}

TEST(SafeWindow, FreeOfAliasEndsWindow) {
  const char *t = "fn main {\n  p = alloc 32\n  q = copy p\n  free q\n  v = load [p]\n  ret v\n}\n";
  EXPECT_FALSE(elided(t, 3));
}

TEST(SafeWindow, CallKillsEscapedPointers) {
  const char *t = R"(
fn f(x) {
  ret
}
fn main {
  p = alloc 32
  call f(p)
  v = load [p]
  ret v
}
)";
  EXPECT_FALSE(elided(t, 2));
}

TEST(SafeWindow, CallDoesNotKillUnescapedPointers) {
  const char *t = R"(
fn f {
  ret
}
fn main {
  p = alloc 32
  call f()
  v = load [p]
  ret v
}
)";
  EXPECT_TRUE(elided(t, 2));
}

TEST(SafeWindow, StoredPointerIsNotSafe) {
  const char *t = R"(
fn main {
  box = alloc 16
  p = alloc 32
  store [box], p
  v = load [p]
  ret v
}
)";
  EXPECT_FALSE(elided(t, 3));
  EXPECT_TRUE(elided(t, 2, SiteKind::Store));
}

TEST(SafeWindow, WhitelistedExternalKeepsWindow) {
  const char *t = "fn main {\n  p = alloc 32\n  extcall print_str(p)\n  v = load [p]\n  ret v\n}\n";
  EXPECT_TRUE(elided(t, 1, SiteKind::ExtBoundary));
  EXPECT_TRUE(elided(t, 2));
  InstrumentOptions narrow;
  narrow.whitelist = {};
  EXPECT_FALSE(elided(t, 2, SiteKind::Load, narrow));
}

TEST(SafeWindow, OpaqueExternalEndsWindow) {
  const char *t = "fn main {\n  p = alloc 32\n  extcall opaque_keep(p)\n  v = load [p]\n  ret v\n}\n";
  EXPECT_FALSE(elided(t, 2));
}

TEST(SafeWindow, JoinRequiresSafetyOnEveryPath) {
  const char *t2 = R"(
fn main(c) {
  p = alloc 32
  q = copy p
  cbr c, a, b
a:
  free q
  br j
b:
  br j
j:
  v = load [p]
  ret v
}
)";
  EXPECT_FALSE(elided(t2, 6));
}

TEST(SafeWindow, LoopBackEdgeSeesFree) {
  const char *t = R"(
fn main(n) {
  p = alloc 32
  i = const 0
top:
  v = load [p]
  free p
  i = add i, 1
  d = cmp lt i, n
  cbr d, top, out
out:
  ret v
}
)";
  EXPECT_FALSE(elided(t, 2));
}

TEST(SafeWindow, FactsExposeFreshness) {
  ir::Program p = parse("fn main {\n  p = alloc 32\n  v = load [p]\n  free p\n  ret v\n}\n");
  const ir::Function &f = p.functions[0];
  SafeWindowFacts facts = safe_window_analysis(f, InstrumentOptions{}.whitelist);
  std::uint32_t r = f.reg("p");
  EXPECT_EQ(facts.at(0, r), Fact::Unknown);
  EXPECT_EQ(facts.at(1, r), Fact::FreshSafe);
  EXPECT_EQ(facts.at(3, r), Fact::Unknown);
}

TEST(Audit, SamplesAreEquivalent) {
  std::filesystem::path dir = std::filesystem::path(PTAUTH_SOURCE_DIR) / "samples";
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".ir")
      continue;
    std::ifstream f(e.path());
    std::ostringstream s;
    s << f.rdbuf();
    AuditReport a = verdict_equivalence_audit(ir::parse_program_or_throw(s.str()));
    EXPECT_TRUE(a.equivalent) << e.path() << ": " << a.divergence;
    if (a.sites_elided > 0 && a.unoptimized.clean()) {
      EXPECT_LT(a.checks_optimized, a.checks_unoptimized) << e.path();
    }
  }
}

TEST(Audit, GeneratedProgramsAreEquivalent) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    AuditReport a = verdict_equivalence_audit(generate_program(s));
    ASSERT_TRUE(a.equivalent) << "seed " << s << ": " << a.divergence;
  }
}

TEST(Audit, UnsoundElisionIsCaught) {
  // Hand-built optimized program: drop the check on a stale load. The shadow
  // re-check must flag it.
  ir::Program p = parse("fn main {\n  p = alloc 32\n  free p\n  v = load [p]\n  ret v\n}\n");
  RunOptions ro;
  ro.shadow_sites = {{"main", 2}};
  RunReport r = interpret(p, ro);
  EXPECT_EQ(r.verdict.kind, VerdictKind::ElisionUnsound);
}
