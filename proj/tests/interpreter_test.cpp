//===- interpreter_test.cpp - Raw and checked execution -------------------===//

#include "ptauth/instrumenter.hpp"
#include "ptauth/interpreter.hpp"
#include "ptauth/parser.hpp"

#include <gtest/gtest.h>

using namespace ptauth;

namespace {

RunReport run(const std::string &text, ExecMode mode, RunOptions ro = {}) {
  ir::Program p = ir::parse_program_or_throw(text);
  ro.mode = mode;
  if (mode == ExecMode::Checked) {
    InstrumentOptions io;
    io.optimize = false;
    return interpret(instrument(p, io).program, ro);
  }
  return interpret(p, ro);
}

const char *kSum = R"(
fn main {
  a = alloc 80
  i = const 0
fill:
  d = cmp ge i, 10
  cbr d, sum, body
body:
  o = add i, i
  o = add o, o
  o = add o, o
  e = ptradd a, o
  store [e], i
  i = add i, 1
  br fill
sum:
  s = const 0
  i = const 0
loop:
  d = cmp ge i, 10
  cbr d, out, step
step:
  o = add i, i
  o = add o, o
  o = add o, o
  e = ptradd a, o
  v = load [e]
  s = add s, v
  i = add i, 1
  br loop
out:
  free a
  ret s
}
)";

} // namespace

TEST(Interpreter, SameResultRawAndChecked) {
  RunReport raw = run(kSum, ExecMode::Raw);
  RunReport chk = run(kSum, ExecMode::Checked);
  ASSERT_TRUE(raw.verdict.clean()) << raw.verdict.detail;
  ASSERT_TRUE(chk.verdict.clean()) << chk.verdict.detail;
  EXPECT_EQ(*raw.return_value, 45);
  EXPECT_EQ(*chk.return_value, 45);
  EXPECT_EQ(raw.instructions_retired, chk.instructions_retired);
  EXPECT_EQ(chk.checks_executed, 20u);
  EXPECT_EQ(raw.checks_executed, 0u);
  EXPECT_GT(chk.cost_units, raw.cost_units);
  EXPECT_EQ(raw.cost_units, raw.instructions_retired);
  // Interior pointers at offsets 0..72 need offset/16 backward steps each.
  std::uint64_t steps = 0;
  for (int i = 0; i < 10; ++i)
    steps += (8 * i) / 16;
  EXPECT_EQ(chk.backward_steps, 2 * steps);
}

TEST(Interpreter, UseAfterFreeVerdictAndOracle) {
  const char *t = "fn main {\n  p = alloc 24\n  q = copy p\n  free p\n  v = load [q]\n  ret v\n}\n";
  RunReport chk = run(t, ExecMode::Checked);
  ASSERT_TRUE(chk.verdict.is_violation());
  EXPECT_EQ(chk.verdict.violation, CheckOutcome::UseAfterFree);
  EXPECT_EQ(chk.verdict.origin, 3u);
  EXPECT_EQ(chk.verdict.event, 3u);
  RunReport raw = run(t, ExecMode::Raw);
  EXPECT_TRUE(raw.verdict.clean());
  ASSERT_EQ(raw.oracle.size(), 1u);
  EXPECT_EQ(raw.oracle[0].kind, CheckOutcome::UseAfterFree);
  EXPECT_EQ(raw.oracle[0].event, 3u);
}

TEST(Interpreter, FreeViolations) {
  RunReport df = run("fn main {\n  p = alloc 8\n  free p\n  free p\n  ret\n}\n", ExecMode::Checked);
  EXPECT_EQ(df.verdict.violation, CheckOutcome::DoubleFree);
  RunReport inv = run("fn main {\n  p = alloc 64\n  q = ptradd p, 32\n  free q\n  ret\n}\n", ExecMode::Checked);
  EXPECT_EQ(inv.verdict.violation, CheckOutcome::InvalidFree);
  RunReport glob = run("global g 16\nfn main {\n  q = globaddr g\n  free q\n  ret\n}\n", ExecMode::Checked);
  EXPECT_EQ(glob.verdict.violation, CheckOutcome::InvalidFree);
  RunReport nul = run("fn main {\n  z = const 0\n  free z\n  ret 1\n}\n", ExecMode::Checked);
  EXPECT_TRUE(nul.verdict.clean());
}

TEST(Interpreter, StalePointerAfterMovingRealloc) {
  const char *t = "fn main {\n  p = alloc 16\n  o = copy p\n  p = realloc p, 400\n  store [o], 1\n  ret\n}\n";
  RunReport chk = run(t, ExecMode::Checked);
  EXPECT_EQ(chk.verdict.violation, CheckOutcome::UseAfterFree);
}

TEST(Interpreter, PointersSurviveMemoryRoundTrip) {
  const char *t = R"(
fn main {
  box = alloc 16
  obj = alloc 32
  store [obj + 8], 77
  store [box], obj
  x = load [box]
  v = load [x + 8]
  free obj
  y = load [box]
  w = load [y + 8]
  ret v
}
)";
  RunReport chk = run(t, ExecMode::Checked);
  EXPECT_EQ(chk.verdict.violation, CheckOutcome::UseAfterFree);
  EXPECT_EQ(chk.verdict.origin, 8u);
  RunReport raw = run(t, ExecMode::Raw);
  ASSERT_FALSE(raw.oracle.empty());
  EXPECT_EQ(raw.oracle[0].event, chk.verdict.event);
}

TEST(Interpreter, ExternalsPrintAndCopy) {
  const char *t = R"(
global s 8
fn main {
  g = globaddr s
  store.1 [g], 111
  store.1 [g + 1], 107
  store.1 [g + 2], 0
  b = alloc 8
  r = extcall str_copy(b, g)
  extcall print_str(r)
  src = alloc 16
  dst = alloc 16
  store [src], b
  extcall mem_copy(dst, src, 16)
  bb = load [dst]
  extcall print_str(bb)
  ret
}
)";
  for (ExecMode m : {ExecMode::Raw, ExecMode::Checked}) {
    RunReport r = run(t, m);
    ASSERT_TRUE(r.verdict.clean()) << r.verdict.detail;
    EXPECT_EQ(r.output, "ok\nok\n");
  }
}

TEST(Interpreter, OpaqueFreeIsSeenLater) {
  const char *t = "fn main {\n  p = alloc 32\n  extcall opaque_free(p)\n  v = load [p]\n  ret v\n}\n";
  RunReport chk = run(t, ExecMode::Checked);
  EXPECT_EQ(chk.verdict.violation, CheckOutcome::UseAfterFree);
}

TEST(Interpreter, FuelAndDepthLimits) {
  RunOptions ro;
  ro.fuel = 1000;
  RunReport spin = run("fn main {\ntop:\n  br top\n}\n", ExecMode::Raw, ro);
  EXPECT_EQ(spin.verdict.kind, VerdictKind::Timeout);
  RunOptions deep;
  deep.max_call_depth = 50;
  RunReport rec = run("fn f {\n  call f()\n  ret\n}\nfn main {\n  call f()\n  ret\n}\n", ExecMode::Raw, deep);
  EXPECT_EQ(rec.verdict.kind, VerdictKind::RuntimeError);
}

TEST(Interpreter, IntegerDerefAndUnsetRead) {
  EXPECT_EQ(run("fn main {\n  x = const 4096\n  v = load [x]\n  ret v\n}\n", ExecMode::Raw).verdict.kind,
            VerdictKind::TypeFault);
  EXPECT_EQ(run("fn main {\n  c = const 0\n  cbr c, set, use\nset:\n  u = const 1\nuse:\n  v = add u, 1\n  ret v\n}\n",
                ExecMode::Raw).verdict.kind, VerdictKind::RuntimeError);
}

TEST(Interpreter, OutOfMemory) {
  RunOptions ro;
  ro.heap_capacity = 4096;
  RunReport r = run("fn main {\n  p = alloc 100000\n  ret\n}\n", ExecMode::Raw, ro);
  EXPECT_EQ(r.verdict.kind, VerdictKind::OutOfMemory);
}

TEST(Interpreter, HeaderCostsNothingForSixteenByteObjects) {
  const char *t = "fn main {\n  a = alloc 16\n  b = alloc 16\n  c = alloc 24\n  ret\n}\n";
  RunReport raw = run(t, ExecMode::Raw), chk = run(t, ExecMode::Checked);
  EXPECT_EQ(raw.peak_bytes, 96u);
  EXPECT_EQ(chk.peak_bytes, 96u);
  EXPECT_EQ(raw.heap_shape, chk.heap_shape);
}

TEST(Interpreter, HeapEventsRecorded) {
  RunOptions ro;
  ro.record_heap_events = true;
  RunReport r = run("fn main {\n  a = alloc 16\n  free a\n  ret\n}\n", ExecMode::Checked, ro);
  ASSERT_EQ(r.heap_events.size(), 2u);
  EXPECT_EQ(r.heap_events[0].kind, HeapEvent::Kind::Alloc);
  EXPECT_EQ(r.heap_events[1].kind, HeapEvent::Kind::Free);
}

TEST(Interpreter, V86ModeSameVerdicts) {
  RunOptions ro;
  ro.runtime.pac_mode = PacMode::V86_Fault;
  RunReport chk = run("fn main {\n  p = alloc 24\n  free p\n  v = load [p + 16]\n  ret v\n}\n", ExecMode::Checked, ro);
  EXPECT_EQ(chk.verdict.violation, CheckOutcome::UseAfterFree);
}
