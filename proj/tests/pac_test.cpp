//===- pac_test.cpp - Software PAC primitive ----------------------------===//

#include "ptauth/pac.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace ptauth;

namespace {

// Reference fold computed bit by bit instead of via the library's mixer.
std::uint16_t xorfold_reference(std::uint64_t addr, std::uint64_t mod, const Key128 &k) {
  std::uint16_t v = 0;
  for (unsigned b = 0; b < 16; ++b) {
    unsigned bit = ((addr >> b) ^ (mod >> b)) & 1;
    v |= static_cast<std::uint16_t>(bit << b);
  }
  return static_cast<std::uint16_t>(v ^ key_fold(k));
}

struct PacFixture : ::testing::TestWithParam<AcFunction> {
  KeySet keys = derive_keys(42);
  const Key128 &key() const { return keys.key(KeySlot::DA); }
};

} // namespace

TEST(PacLayout, CodeLivesInTopSixteenBits) {
  SignedPointer sp(RawAddress(0x1234'5678'9abcull), AuthCode(0xbeef));
  EXPECT_EQ(sp.bits, 0xbeef'0000'0000'0000ull | 0x1234'5678'9abcull);
  EXPECT_EQ(sp.ac().value, 0xbeef);
  EXPECT_EQ(pac_strip(sp).value, 0x1234'5678'9abcull);
}

TEST(PacLayout, NonCanonicalAddressIsRejected) {
  KeySet ks = derive_keys(1);
  EXPECT_THROW(pac_sign(RawAddress(1ull << 50), 7, ks.key(KeySlot::DA)), NonCanonicalAddress);
}

TEST(PacKeys, DerivationIsDeterministicAndSlotsDiffer) {
  KeySet a = derive_keys(9), b = derive_keys(9), c = derive_keys(10);
  EXPECT_EQ(a.key(KeySlot::DA).lo, b.key(KeySlot::DA).lo);
  EXPECT_NE(a.key(KeySlot::DA).lo, c.key(KeySlot::DA).lo);
  EXPECT_NE(a.key(KeySlot::DA).lo, a.key(KeySlot::IA).lo);
}

TEST(PacXorFold, MatchesBitwiseReference) {
  KeySet ks = derive_keys(3);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t addr = rng() & kAddressMask, mod = rng();
    EXPECT_EQ(compute_ac(RawAddress(addr), mod, ks.key(KeySlot::DA), AcFunction::XorFold).value,
              xorfold_reference(addr, mod, ks.key(KeySlot::DA)));
  }
}

TEST(PacXorFold, IgnoresHighBitsOfModifier) {
  KeySet ks = derive_keys(3);
  RawAddress a(0x10'0000'1230ull);
  EXPECT_EQ(compute_ac(a, 0x1'0000'0042ull, ks.key(KeySlot::DA), AcFunction::XorFold),
            compute_ac(a, 0x42ull, ks.key(KeySlot::DA), AcFunction::XorFold));
}

TEST_P(PacFixture, RoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    RawAddress a(rng() & kAddressMask);
    std::uint64_t mod = rng();
    SignedPointer sp = pac_sign(a, mod, key(), GetParam());
    for (PacMode m : {PacMode::V83_Poison, PacMode::V86_Fault}) {
      AuthResult r = pac_auth(sp, mod, key(), m, GetParam());
      ASSERT_TRUE(r.ok());
      EXPECT_EQ(r.address().value, a.value);
    }
  }
}

TEST_P(PacFixture, EverySingleBitTamperIsCaught) {
  RawAddress a(0x1000'0000'0040ull);
  SignedPointer sp = pac_sign(a, 0xdeadbeef, key(), GetParam());
  for (unsigned bit = 48; bit < 64; ++bit) {
    SignedPointer bad(sp.bits ^ (1ull << bit));
    EXPECT_FALSE(pac_auth(bad, 0xdeadbeef, key(), PacMode::V86_Fault, GetParam()).ok()) << bit;
  }
}

TEST_P(PacFixture, FailureDelivery) {
  RawAddress a(0x1000'0000'0040ull);
  SignedPointer bad(pac_sign(a, 1, key(), GetParam()).bits ^ (1ull << 55));
  AuthResult v83 = pac_auth(bad, 1, key(), PacMode::V83_Poison, GetParam());
  EXPECT_EQ(v83.status, AuthResult::Status::Poisoned);
  EXPECT_EQ(v83.value >> 56, kPoisonByte);
  EXPECT_EQ(v83.value & kAddressMask, a.value);
  AuthResult v86 = pac_auth(bad, 1, key(), PacMode::V86_Fault, GetParam());
  EXPECT_EQ(v86.status, AuthResult::Status::Fault);
  EXPECT_EQ(v86.value, bad.bits);
}

TEST_P(PacFixture, WrongModifierOrKeyFailsMostly) {
  KeySet other = derive_keys(43);
  std::mt19937_64 rng(2);
  int mod_hits = 0, key_hits = 0;
  for (int i = 0; i < 4000; ++i) {
    RawAddress a((rng() & kAddressMask) & ~0xfull);
    std::uint64_t m = rng() | 1;
    SignedPointer sp = pac_sign(a, m, key(), GetParam());
    mod_hits += pac_auth(sp, m + 2, key(), PacMode::V86_Fault, GetParam()).ok();
    key_hits += pac_auth(sp, m, other.key(KeySlot::DA), PacMode::V86_Fault, GetParam()).ok();
  }
  EXPECT_LE(mod_hits, 2);
  EXPECT_LE(key_hits, 2);
}

INSTANTIATE_TEST_SUITE_P(AcFunctions, PacFixture,
                         ::testing::Values(AcFunction::XorFold, AcFunction::KeyedMixer),
                         [](const auto &info) { return std::string(to_string(info.param)); });

TEST(PacMixer, UsesAllAddressBits) {
  KeySet ks = derive_keys(8);
  RawAddress a(0x0000'1000'0000'0000ull);
  int changed = 0;
  for (unsigned bit = 16; bit < 48; ++bit)
    changed += compute_ac(a, 5, ks.key(KeySlot::DA), AcFunction::KeyedMixer) !=
               compute_ac(RawAddress(a.value ^ (1ull << bit)), 5, ks.key(KeySlot::DA), AcFunction::KeyedMixer);
  EXPECT_GE(changed, 30);
}

TEST(PacMixer, CodesSpreadOverSixteenBits) {
  KeySet ks = derive_keys(8);
  std::set<std::uint16_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i)
    seen.insert(compute_ac(RawAddress(0x1000'0000'0000ull + 16 * i), 77, ks.key(KeySlot::DA),
                           AcFunction::KeyedMixer)
                    .value);
  // 4096 draws from 65536 values keep ~97% distinct.
  EXPECT_GE(seen.size(), 3900u);
}
