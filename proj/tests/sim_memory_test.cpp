//===- sim_memory_test.cpp - Heap simulator ------------------------------===//

#include "ptauth/sim_memory.hpp"

#include <gtest/gtest.h>

#include <array>
#include <map>
#include <random>

using namespace ptauth;

TEST(HeapFootprint, GranuleRounding) {
  EXPECT_EQ(chunk_footprint(16, true), 32u);
  EXPECT_EQ(chunk_footprint(24, true), 32u);
  EXPECT_EQ(chunk_footprint(25, true), 64u);
  EXPECT_EQ(chunk_footprint(16, false), 32u);
  EXPECT_EQ(chunk_footprint(32, false), 32u);
  EXPECT_EQ(chunk_footprint(32, true), 64u);
  EXPECT_EQ(chunk_footprint(0, false), 0u);
}

TEST(HeapLayout, BasesAreAlignedAndHeaderPrecedesBase) {
  Heap h;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    std::uint64_t sz = 1 + rng() % 300;
    RawAddress b = h.alloc(sz);
    EXPECT_EQ(b.value % kAlignment, 0u);
    EXPECT_TRUE(h.is_mapped(RawAddress(b.value - kHeaderBytes)));
    auto c = h.chunk_of(b);
    ASSERT_TRUE(c);
    EXPECT_EQ(c->padded_size, chunk_footprint(sz, true));
  }
}

TEST(HeapLayout, RawHeapHasNoHeader) {
  Heap h(HeapConfig{.inline_header = false});
  RawAddress a = h.alloc(16), b = h.alloc(16);
  EXPECT_EQ(b.value - a.value, 32u);
  EXPECT_EQ(h.header_bytes(), 0u);
}

TEST(HeapReuse, FirstFitLowestAddress) {
  Heap h;
  RawAddress a = h.alloc(100), b = h.alloc(100), c = h.alloc(100);
  (void)c;
  ASSERT_EQ(h.free(a), FreeStatus::Ok);
  ASSERT_EQ(h.free(b), FreeStatus::Ok);
  // a and b coalesce; a small request lands at the lowest free address.
  RawAddress d = h.alloc(16);
  EXPECT_EQ(d.value, a.value);
}

TEST(HeapFree, InvalidAndDoubleFree) {
  Heap h;
  RawAddress a = h.alloc(64);
  EXPECT_EQ(h.free(RawAddress(a.value + 16)), FreeStatus::InvalidFree);
  EXPECT_EQ(h.free(a), FreeStatus::Ok);
  EXPECT_EQ(h.free(a), FreeStatus::InvalidFree);
  EXPECT_TRUE(h.was_base(a));
}

TEST(HeapRealloc, GrowthMovesAndCopies) {
  Heap h;
  RawAddress a = h.alloc(16);
  ASSERT_FALSE(h.write_u64(a, 0x1122334455667788ull).wild);
  auto r = h.realloc(a, 200);
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->moved);
  EXPECT_NE(r->base.value, a.value);
  EXPECT_EQ(h.read_u64(r->base).value_or(0), 0x1122334455667788ull);
  EXPECT_FALSE(h.chunk_of(a).has_value() && h.chunk_of(a)->base == a && h.chunk_of(a)->live);
}

TEST(HeapRealloc, ShrinkStaysInPlace) {
  Heap h;
  RawAddress a = h.alloc(200);
  auto r = h.realloc(a, 40);
  ASSERT_TRUE(r);
  EXPECT_FALSE(r->moved);
  EXPECT_EQ(r->base.value, a.value);
}

TEST(HeapAccess, UnmappedReadFailsAndWildWriteIsCounted) {
  Heap h;
  std::array<std::uint8_t, 8> buf{};
  EXPECT_FALSE(h.read(RawAddress(0x10), buf));
  EXPECT_TRUE(h.write(RawAddress(0x10), buf).wild);
  EXPECT_EQ(h.wild_writes(), 1u);
}

TEST(HeapAccess, CrossChunkWriteIsFlagged) {
  Heap h;
  RawAddress a = h.alloc(16);
  h.alloc(16);
  std::array<std::uint8_t, 8> buf{};
  // The last 8 bytes of a's 32-byte region hold the next chunk's header.
  auto w = h.write(RawAddress(a.value + 20), buf);
  EXPECT_TRUE(w.cross_chunk);
  EXPECT_EQ(h.cross_chunk_writes(), 1u);
}

TEST(HeapStatics, NotCountedInHeapBytes) {
  Heap h;
  RawAddress s = h.map_static(64);
  EXPECT_TRUE(h.is_static(s));
  EXPECT_FALSE(h.in_heap_span(s));
  EXPECT_EQ(h.usage_stats().current, 0u);
  h.alloc(16);
  EXPECT_EQ(h.usage_stats().current, 32u);
}

TEST(HeapUsage, PeakAndMean) {
  Heap h;
  RawAddress a = h.alloc(100); // 128 bytes
  h.sample();
  h.free(a);
  h.sample();
  UsageStats u = h.usage_stats();
  EXPECT_EQ(u.peak, 128u);
  EXPECT_EQ(u.current, 0u);
  EXPECT_DOUBLE_EQ(u.mean_sampled, 64.0);
}

TEST(HeapCapacity, ExhaustionThrows) {
  Heap h(HeapConfig{.inline_header = true, .capacity = 1024});
  EXPECT_THROW(
      {
        for (int i = 0; i < 100; ++i)
          h.alloc(64);
      },
      AllocFailure);
}

TEST(HeapEvents, RecordedWhenEnabled) {
  Heap h(HeapConfig{.inline_header = true, .capacity = 1u << 20, .record_events = true});
  RawAddress a = h.alloc(8);
  h.free(a);
  h.free(a);
  ASSERT_EQ(h.events().size(), 3u);
  EXPECT_EQ(h.events()[0].kind, HeapEvent::Kind::Alloc);
  EXPECT_EQ(h.events()[1].kind, HeapEvent::Kind::Free);
  EXPECT_EQ(h.events()[2].kind, HeapEvent::Kind::InvalidFree);
}

// Replays random alloc/free traces against a reference set of live bases:
// free succeeds iff the address is a live base, and current bytes always
// equal the summed footprints of live chunks.
TEST(HeapInvariants, RandomTraceMatchesReferenceSet) {
  for (bool header : {true, false}) {
    Heap h(HeapConfig{.inline_header = header});
    std::mt19937_64 rng(header ? 3 : 4);
    std::map<std::uint64_t, std::uint64_t> live; // base -> size
    std::vector<std::uint64_t> ever;
    for (int step = 0; step < 5000; ++step) {
      if (live.empty() || rng() % 3 != 0) {
        std::uint64_t sz = 1 + rng() % 600;
        RawAddress b = h.alloc(sz);
        ASSERT_FALSE(live.contains(b.value));
        live[b.value] = sz;
        ever.push_back(b.value);
      } else {
        std::uint64_t target;
        switch (rng() % 3) {
        case 0: target = std::next(live.begin(), rng() % live.size())->first; break;
        case 1: target = ever[rng() % ever.size()]; break;
        default: target = ever[rng() % ever.size()] + 16; break;
        }
        bool expect_ok = live.contains(target);
        ASSERT_EQ(h.free(RawAddress(target)) == FreeStatus::Ok, expect_ok) << step;
        live.erase(target);
      }
      std::uint64_t footprint = 0;
      for (const auto &[b, s] : live)
        footprint += chunk_footprint(s, header);
      ASSERT_EQ(h.usage_stats().current, footprint) << step;
    }
    EXPECT_EQ(h.live_chunks().size(), live.size());
  }
}
