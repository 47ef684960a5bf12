//===- runtime_test.cpp - Points-to authentication runtime ----------------===//

#include "ptauth/runtime.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ptauth;

namespace {

struct RuntimeTest : ::testing::Test {
  Heap heap;
  RuntimeConfig cfg;
  std::optional<Runtime> rt;
  void SetUp() override { rt.emplace(heap, cfg); }
  void reset(RuntimeConfig c) {
    heap = Heap();
    rt.emplace(heap, c);
  }
};

SignedPointer offset(SignedPointer sp, std::uint64_t off) { return SignedPointer(sp.bits + off); }

} // namespace

TEST_F(RuntimeTest, BasePointerAuthenticatesWithoutSearch) {
  SignedPointer p = rt->malloc(40);
  CheckResult r = rt->check(p);
  EXPECT_EQ(r.outcome, CheckOutcome::OkAt);
  EXPECT_EQ(r.base.value, pac_strip(p).value);
  EXPECT_EQ(r.backward_steps, 0u);
}

TEST_F(RuntimeTest, InteriorPointerWalksBackToBase) {
  SignedPointer p = rt->malloc(200);
  CheckResult r = rt->check(offset(p, 100));
  EXPECT_EQ(r.outcome, CheckOutcome::OkAt);
  EXPECT_EQ(r.base.value, pac_strip(p).value);
  EXPECT_EQ(r.backward_steps, 6u); // 96 / 16
  EXPECT_EQ(rt->counters().backward_steps, 6u);
  EXPECT_EQ(rt->counters().step_histogram.at(6), 1u);
}

TEST_F(RuntimeTest, HeaderIsZeroAfterFree) {
  SignedPointer p = rt->malloc(16);
  RawAddress b = pac_strip(p);
  EXPECT_NE(rt->read_id(b)->value, 0u);
  ASSERT_TRUE(rt->free(p).ok());
  // The granule may be unmapped or reused; either way no live ID for p.
  auto id = rt->read_id(b);
  EXPECT_TRUE(!id || id->value == 0);
}

TEST_F(RuntimeTest, UseAfterFreeDetected) {
  SignedPointer p = rt->malloc(64);
  SignedPointer q = rt->malloc(64); // keeps p's region mapped-adjacent
  (void)q;
  ASSERT_TRUE(rt->free(p).ok());
  EXPECT_EQ(rt->check(p).outcome, CheckOutcome::UseAfterFree);
  EXPECT_EQ(rt->check(offset(p, 40)).outcome, CheckOutcome::UseAfterFree);
}

TEST_F(RuntimeTest, ReuseOfSlotDoesNotRevalidateStalePointer) {
  SignedPointer p = rt->malloc(64);
  ASSERT_TRUE(rt->free(p).ok());
  SignedPointer p2 = rt->malloc(64);
  ASSERT_EQ(pac_strip(p2).value, pac_strip(p).value);
  EXPECT_EQ(rt->check(p).outcome, CheckOutcome::UseAfterFree);
  EXPECT_TRUE(rt->check(p2).ok());
}

TEST_F(RuntimeTest, FreeClassification) {
  SignedPointer p = rt->malloc(128);
  EXPECT_EQ(rt->free(offset(p, 48)).outcome, CheckOutcome::InvalidFree);
  EXPECT_EQ(rt->free(offset(p, 8)).outcome, CheckOutcome::InvalidFree);
  EXPECT_TRUE(rt->check(p).ok()) << "failed free must not release";
  EXPECT_TRUE(rt->free(p).ok());
  EXPECT_EQ(rt->free(p).outcome, CheckOutcome::DoubleFree);
  EXPECT_EQ(rt->counters().free_backward_steps, 0u);
}

TEST_F(RuntimeTest, StaleBaseInsideReusedChunkIsDoubleFree) {
  SignedPointer x = rt->malloc(16);
  SignedPointer a = rt->malloc(16);
  ASSERT_TRUE(rt->free(x).ok());
  ASSERT_TRUE(rt->free(a).ok());
  // Coalesced 64-byte hole; a's old base is now 32 bytes into c.
  SignedPointer c = rt->malloc(40);
  ASSERT_EQ(pac_strip(c).value, pac_strip(x).value);
  EXPECT_EQ(rt->free(a).outcome, CheckOutcome::DoubleFree);
  EXPECT_EQ(rt->free(offset(c, 32)).outcome, CheckOutcome::InvalidFree);
  EXPECT_TRUE(rt->free(c).ok());
}

TEST_F(RuntimeTest, StaticPointersAreNotChecked) {
  RawAddress g = heap.map_static(32);
  SignedPointer sp(g, AuthCode(0));
  EXPECT_EQ(rt->check(sp).outcome, CheckOutcome::OkStatic);
  EXPECT_EQ(rt->check(offset(sp, 20)).outcome, CheckOutcome::OkStatic);
}

TEST_F(RuntimeTest, WildPointerOutsideHeap) {
  SignedPointer sp(RawAddress(0x4000), AuthCode(0x1234));
  EXPECT_EQ(rt->check(sp).outcome, CheckOutcome::WildPointer);
}

TEST_F(RuntimeTest, SearchStopsAtMaxDistance) {
  SignedPointer p = rt->malloc(8192);
  EXPECT_TRUE(rt->check(offset(p, 4096)).ok());
  EXPECT_FALSE(rt->check(offset(p, 4112)).ok());
}

TEST_F(RuntimeTest, ReallocRefreshesIdEvenInPlace) {
  SignedPointer p = rt->malloc(200);
  auto r = rt->realloc(p, 40);
  ASSERT_TRUE(r.auth.ok());
  EXPECT_FALSE(r.moved);
  EXPECT_EQ(pac_strip(r.pointer).value, pac_strip(p).value);
  EXPECT_FALSE(rt->check(p).ok());
  EXPECT_TRUE(rt->check(r.pointer).ok());
}

TEST_F(RuntimeTest, ReallocOfInteriorIsInvalidFree) {
  SignedPointer p = rt->malloc(64);
  EXPECT_EQ(rt->realloc(offset(p, 16), 128).auth.outcome, CheckOutcome::InvalidFree);
}

TEST_F(RuntimeTest, CostModelCharges) {
  SignedPointer p = rt->malloc(16);
  // id generation + header write + sign
  EXPECT_EQ(rt->counters().cost_units, 1u + 1u + 8u);
  std::uint64_t before = rt->counters().cost_units;
  rt->check(p);
  // gate + header read + auth
  EXPECT_EQ(rt->counters().cost_units - before, 1u + 1u + 8u);
  EXPECT_EQ(rt->counters().check_cost_units, 10u);
}

TEST_F(RuntimeTest, FixedCycleModeSkipsSearch) {
  RuntimeConfig c;
  c.accounting = CostAccounting::FixedCycle4;
  reset(c);
  SignedPointer p = rt->malloc(64);
  std::uint64_t before = rt->counters().cost_units;
  EXPECT_EQ(rt->check(p).outcome, CheckOutcome::OkAt);
  EXPECT_EQ(rt->counters().cost_units - before, 1u + 1u + 4u);
  EXPECT_EQ(rt->check(offset(p, 32)).outcome, CheckOutcome::Skipped);
  EXPECT_EQ(rt->counters().backward_steps, 0u);
}

TEST_F(RuntimeTest, V86FaultsInsideSearchAreMasked) {
  RuntimeConfig c;
  c.pac_mode = PacMode::V86_Fault;
  reset(c);
  SignedPointer a = rt->malloc(64);
  SignedPointer b = rt->malloc(64);
  (void)a;
  // Walk from b+48 down to b: candidates at b+32 and b+16 read zero
  // headers, so only the base authenticates.
  EXPECT_TRUE(rt->check(offset(b, 48)).ok());
  EXPECT_EQ(rt->counters().masked_faults, 0u);
  // A tampered code fails at b and again at a; neither fault escapes.
  SignedPointer forged(b.bits ^ (1ull << 50));
  EXPECT_EQ(rt->check(offset(forged, 48)).outcome, CheckOutcome::UseAfterFree);
  EXPECT_GE(rt->counters().masked_faults, 1u);
}

TEST_F(RuntimeTest, ResignAcceptsOnlyLiveBases) {
  SignedPointer p = rt->malloc(32);
  auto rs = rt->resign_external(pac_strip(p));
  ASSERT_TRUE(rs);
  EXPECT_EQ(rs->bits, p.bits);
  EXPECT_FALSE(rt->resign_external(RawAddress(pac_strip(p).value + 16)));
  rt->free(p);
  EXPECT_FALSE(rt->resign_external(pac_strip(p)));
}

TEST_F(RuntimeTest, SprayedHeaderDoesNotForgeAuthentication) {
  SignedPointer p = rt->malloc(64);
  SignedPointer q = rt->malloc(64);
  RawAddress qb = pac_strip(q);
  rt->free(p);
  // Attacker copies a guessed ID into p's old header slot.
  CheckResult r = rt->id_spray_probe(p, ObjectId{0x1234}, RawAddress(pac_strip(p).value - kHeaderBytes));
  EXPECT_FALSE(r.ok());
  (void)qb;
}

TEST_F(RuntimeTest, IdsAreNonzeroAndDistinct) {
  std::set<std::uint64_t> ids;
  for (int i = 0; i < 500; ++i) {
    SignedPointer p = rt->malloc(16);
    auto id = rt->read_id(pac_strip(p));
    ASSERT_TRUE(id && id->valid());
    ids.insert(id->value);
  }
  EXPECT_EQ(ids.size(), 500u);
}

// Brute-force oracle: the base is known from allocation bookkeeping, and the
// step count is the number of 16-byte granules between the aligned address
// and that base. Headers inside the object are zero, so nothing earlier can
// match.
TEST(RuntimeOracle, BackwardSearchMatchesBruteForce) {
  for (AcFunction fn : {AcFunction::XorFold, AcFunction::KeyedMixer}) {
    Heap heap;
    RuntimeConfig cfg;
    cfg.ac_function = fn;
    Runtime rt(heap, cfg);
    std::mt19937_64 rng(99);
    std::vector<std::pair<SignedPointer, std::uint64_t>> objs;
    for (int i = 0; i < 200; ++i) {
      std::uint64_t sz = 1 + rng() % 1024;
      objs.push_back({rt.malloc(sz), sz});
    }
    for (int i = 0; i < 2000; ++i) {
      auto [p, sz] = objs[rng() % objs.size()];
      std::uint64_t off = rng() % sz;
      std::uint64_t base = p.bits & kAddressMask;
      std::uint64_t expect_steps = (((base + off) / 16 * 16) - base) / 16;
      CheckResult r = rt.check(SignedPointer(p.bits + off));
      ASSERT_EQ(r.outcome, CheckOutcome::OkAt);
      ASSERT_EQ(r.base.value, base);
      ASSERT_EQ(r.backward_steps, expect_steps);
    }
  }
}
