//===- sim_memory.hpp - Simulated byte-addressable heap ---------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// A ptmalloc-flavoured simulated heap. Chunks come in 32-byte granules and
/// every user base is 16-byte aligned. With an inline header enabled, the
/// 8 bytes just below each user base belong to the chunk and hold the object
/// ID; the header rides in the granule padding whenever the padding has room.
///
/// Layout of one chunk (inline header):
///
///   region_start        base                     base + requested
///   |<- 8 B header ->|<----- user bytes ----->|<- padding ->|
///   |<--------------- padded_size (multiple of 32) -------->|
///
/// Padding bytes are mapped. Freed chunks are unmapped until reused; reuse is
/// first-fit over coalesced free regions, lowest address first.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_SIM_MEMORY_HPP
#define PTAUTH_SIM_MEMORY_HPP

#include "ptauth/pac.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace ptauth {

inline constexpr std::uint64_t kGranule = 32;
inline constexpr std::uint64_t kAlignment = 16;
inline constexpr std::uint64_t kHeaderBytes = 8;
inline constexpr std::uint64_t kHeapBase = 0x0000'1000'0000'0000ull;
inline constexpr std::uint64_t kStaticBase = 0x0000'0800'0000'0000ull;

constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t to) { return (v + to - 1) / to * to; }

/// Bytes a request of \p size occupies. The header costs nothing when the
/// granule padding already has 8 spare bytes.
constexpr std::uint64_t chunk_footprint(std::uint64_t size, bool inline_header) {
  return round_up(size + (inline_header ? kHeaderBytes : 0), kGranule);
}

class AllocFailure : public std::runtime_error {
public:
  explicit AllocFailure(const std::string &what) : std::runtime_error(what) {}
};

struct ChunkInfo {
  RawAddress base;
  std::uint64_t requested_size = 0;
  std::uint64_t padded_size = 0;
  bool live = false;

  std::uint64_t region_start(bool inline_header) const {
    return base.value - (inline_header ? kHeaderBytes : 0);
  }
  friend bool operator==(const ChunkInfo &, const ChunkInfo &) = default;
};

enum class FreeStatus : std::uint8_t { Ok, InvalidFree };

struct HeapEvent {
  enum class Kind : std::uint8_t { Alloc, Free, InvalidFree, WildWrite, CrossChunkWrite, UnmappedRead };
  Kind kind;
  std::uint64_t address;
  std::uint64_t size;
};

inline const char *to_string(HeapEvent::Kind k) {
  switch (k) {
  case HeapEvent::Kind::Alloc: return "alloc";
  case HeapEvent::Kind::Free: return "free";
  case HeapEvent::Kind::InvalidFree: return "invalid_free";
  case HeapEvent::Kind::WildWrite: return "wild_write";
  case HeapEvent::Kind::CrossChunkWrite: return "cross_chunk_write";
  case HeapEvent::Kind::UnmappedRead: return "unmapped_read";
  }
  return "?";
}

struct HeapConfig {
  bool inline_header = true;
  std::uint64_t capacity = std::uint64_t{1} << 32;
  bool record_events = false;
};

struct UsageStats {
  std::uint64_t current = 0;
  std::uint64_t peak = 0;
  double mean_sampled = 0.0;
};

class Heap {
public:
  explicit Heap(HeapConfig cfg = {}) : cfg_(cfg), top_(kHeapBase + kAlignment - header_bytes()) {}

  const HeapConfig &config() const { return cfg_; }
  std::uint64_t header_bytes() const { return cfg_.inline_header ? kHeaderBytes : 0; }

  /// Returns the 16-byte aligned user base. New chunks read as zero.
  RawAddress alloc(std::uint64_t size) {
    if (size == 0)
      throw AllocFailure("zero-sized allocation");
    if (size > cfg_.capacity)
      throw AllocFailure("allocation of " + std::to_string(size) + " bytes exceeds capacity");
    std::uint64_t padded = chunk_footprint(size, cfg_.inline_header);
    std::uint64_t start = take_region(padded);
    Chunk c;
    c.info = ChunkInfo{RawAddress(start + header_bytes()), size, padded, true};
    c.bytes.assign(padded, 0);
    RawAddress base = c.info.base;
    chunks_.emplace(start, std::move(c));
    ever_bases_.insert(base.value);
    current_ += padded;
    peak_ = std::max(peak_, current_);
    ++cumulative_;
    log(HeapEvent::Kind::Alloc, base.value, size);
    return base;
  }

  FreeStatus free(RawAddress base) {
    auto it = chunks_.find(base.value - header_bytes());
    if (it == chunks_.end() || it->second.info.base != base) {
      log(HeapEvent::Kind::InvalidFree, base.value, 0);
      return FreeStatus::InvalidFree;
    }
    release(it);
    log(HeapEvent::Kind::Free, base.value, 0);
    return FreeStatus::Ok;
  }

  struct ReallocResult {
    RawAddress base;
    bool moved = false;
  };

  /// Resizes the chunk at \p base. Shrinks stay in place (a spare tail goes
  /// back to the free list); any growth past the current granules moves.
  /// Returns nullopt when \p base is not a live chunk base.
  std::optional<ReallocResult> realloc(RawAddress base, std::uint64_t new_size) {
    if (new_size == 0)
      throw AllocFailure("zero-sized reallocation");
    auto it = chunks_.find(base.value - header_bytes());
    if (it == chunks_.end() || it->second.info.base != base)
      return std::nullopt;
    std::uint64_t padded = chunk_footprint(new_size, cfg_.inline_header);
    Chunk &c = it->second;
    if (padded <= c.info.padded_size) {
      std::uint64_t spare = c.info.padded_size - padded;
      if (spare >= kGranule) {
        add_free(it->first + padded, spare);
        c.bytes.resize(padded);
        c.info.padded_size = padded;
        current_ -= spare;
      }
      // Bytes past the new request but inside the chunk keep their contents.
      c.info.requested_size = new_size;
      return ReallocResult{base, false};
    }
    std::vector<std::uint8_t> keep(c.bytes.begin() + static_cast<std::ptrdiff_t>(header_bytes()),
                                   c.bytes.begin() + static_cast<std::ptrdiff_t>(
                                                         header_bytes() + c.info.requested_size));
    RawAddress nb = alloc(new_size);
    auto &nc = chunks_.at(nb.value - header_bytes());
    std::size_t n = std::min<std::size_t>(keep.size(), new_size);
    std::copy_n(keep.begin(), n, nc.bytes.begin() + static_cast<std::ptrdiff_t>(header_bytes()));
    free(base);
    return ReallocResult{nb, true};
  }

  /// Maps a never-freed static object (globals). Not counted as heap bytes.
  RawAddress map_static(std::uint64_t size) {
    std::uint64_t padded = round_up(std::max<std::uint64_t>(size, 1), kAlignment);
    RawAddress base(static_top_);
    statics_.emplace(static_top_, Static{size, std::vector<std::uint8_t>(padded, 0)});
    static_top_ += padded;
    return base;
  }

  bool is_static(RawAddress addr) const { return find_static(addr.value) != nullptr; }

  bool is_mapped(RawAddress addr) const {
    return find_chunk(addr.value) != nullptr || find_static(addr.value) != nullptr;
  }

  /// The live chunk whose region (header and padding included) covers addr.
  std::optional<ChunkInfo> chunk_of(RawAddress addr) const {
    if (const Chunk *c = find_chunk(addr.value))
      return c->info;
    return std::nullopt;
  }

  /// True when \p addr has been handed out as a user base at some point.
  bool was_base(RawAddress addr) const { return ever_bases_.contains(addr.value); }

  /// True when \p addr lies inside the part of the heap that has ever held
  /// chunks, live or not.
  bool in_heap_span(RawAddress addr) const { return addr.value >= kHeapBase && addr.value < top_; }

  /// Copies bytes out. Returns false if any byte is unmapped; \p out is then
  /// filled with zeros for the unmapped part.
  bool read(RawAddress addr, std::span<std::uint8_t> out) {
    bool ok = true;
    std::uint64_t a = addr.value;
    std::size_t done = 0;
    while (done < out.size()) {
      std::size_t avail = 0;
      std::uint8_t *src = locate(a + done, avail);
      if (!src) {
        out[done++] = 0;
        ok = false;
        continue;
      }
      std::size_t n = std::min(avail, out.size() - done);
      std::memcpy(out.data() + done, src, n);
      done += n;
    }
    if (!ok)
      log(HeapEvent::Kind::UnmappedRead, addr.value, out.size());
    return ok;
  }

  std::optional<std::uint64_t> read_u64(RawAddress addr) {
    std::array<std::uint8_t, 8> buf{};
    if (!read(addr, buf))
      return std::nullopt;
    std::uint64_t v = 0;
    std::memcpy(&v, buf.data(), 8);
    return v;
  }

  struct WriteResult {
    bool wild = false;        ///< some bytes landed on unmapped memory
    bool cross_chunk = false; ///< the write touched more than one chunk
  };

  /// Writes to unmapped memory are dropped and recorded, never fatal.
  WriteResult write(RawAddress addr, std::span<const std::uint8_t> in) {
    WriteResult r;
    std::uint64_t a = addr.value;
    std::size_t done = 0;
    const void *first_owner = nullptr;
    while (done < in.size()) {
      std::size_t avail = 0;
      const void *owner = nullptr;
      std::uint8_t *dst = locate(a + done, avail, &owner);
      if (!dst) {
        r.wild = true;
        ++done;
        continue;
      }
      if (first_owner && owner != first_owner)
        r.cross_chunk = true;
      if (!first_owner)
        first_owner = owner;
      std::size_t n = std::min(avail, in.size() - done);
      std::memcpy(dst, in.data() + done, n);
      done += n;
    }
    if (r.wild) {
      ++wild_writes_;
      log(HeapEvent::Kind::WildWrite, addr.value, in.size());
    }
    if (r.cross_chunk) {
      ++cross_chunk_writes_;
      log(HeapEvent::Kind::CrossChunkWrite, addr.value, in.size());
    }
    return r;
  }

  WriteResult write_u64(RawAddress addr, std::uint64_t v) {
    std::array<std::uint8_t, 8> buf{};
    std::memcpy(buf.data(), &v, 8);
    return write(addr, buf);
  }

  /// Samples current bytes for the mean-usage statistic.
  void sample() {
    sample_sum_ += static_cast<double>(current_);
    ++samples_;
  }

  UsageStats usage_stats() const {
    return {current_, peak_, samples_ ? sample_sum_ / static_cast<double>(samples_) : 0.0};
  }

  std::uint64_t cumulative_allocations() const { return cumulative_; }
  std::uint64_t wild_writes() const { return wild_writes_; }
  std::uint64_t cross_chunk_writes() const { return cross_chunk_writes_; }

  std::vector<ChunkInfo> live_chunks() const {
    std::vector<ChunkInfo> out;
    out.reserve(chunks_.size());
    for (const auto &[start, c] : chunks_)
      out.push_back(c.info);
    return out;
  }

  const std::vector<HeapEvent> &events() const { return events_; }

  /// One JSON object per line: {"event":..,"addr":..,"size":..}.
  void dump_events(std::ostream &os) const {
    for (const auto &e : events_)
      os << "{\"event\":\"" << to_string(e.kind) << "\",\"addr\":" << e.address
         << ",\"size\":" << e.size << "}\n";
  }

private:
  struct Chunk {
    ChunkInfo info;
    std::vector<std::uint8_t> bytes; // covers the whole region
  };
  struct Static {
    std::uint64_t size;
    std::vector<std::uint8_t> bytes;
  };

  void log(HeapEvent::Kind k, std::uint64_t addr, std::uint64_t size) {
    if (cfg_.record_events)
      events_.push_back({k, addr, size});
  }

  const Chunk *find_chunk(std::uint64_t a) const {
    auto it = chunks_.upper_bound(a);
    if (it == chunks_.begin())
      return nullptr;
    --it;
    return a < it->first + it->second.info.padded_size ? &it->second : nullptr;
  }

  const Static *find_static(std::uint64_t a) const {
    auto it = statics_.upper_bound(a);
    if (it == statics_.begin())
      return nullptr;
    --it;
    return a < it->first + it->second.bytes.size() ? &it->second : nullptr;
  }

  std::uint8_t *locate(std::uint64_t a, std::size_t &avail, const void **owner = nullptr) {
    if (auto it = chunks_.upper_bound(a); it != chunks_.begin()) {
      --it;
      std::uint64_t off = a - it->first;
      if (off < it->second.bytes.size()) {
        avail = it->second.bytes.size() - off;
        if (owner)
          *owner = &it->second;
        return it->second.bytes.data() + off;
      }
    }
    if (auto it = statics_.upper_bound(a); it != statics_.begin()) {
      --it;
      std::uint64_t off = a - it->first;
      if (off < it->second.bytes.size()) {
        avail = it->second.bytes.size() - off;
        if (owner)
          *owner = &it->second;
        return it->second.bytes.data() + off;
      }
    }
    return nullptr;
  }

  std::uint64_t take_region(std::uint64_t padded) {
    for (auto it = free_.begin(); it != free_.end(); ++it) {
      if (it->second < padded)
        continue;
      std::uint64_t start = it->first;
      std::uint64_t rest = it->second - padded;
      free_.erase(it);
      if (rest)
        free_.emplace(start + padded, rest);
      return start;
    }
    if (top_ - kHeapBase + padded > cfg_.capacity)
      throw AllocFailure("simulated heap exhausted");
    std::uint64_t start = top_;
    top_ += padded;
    return start;
  }

  void add_free(std::uint64_t start, std::uint64_t size) {
    auto next = free_.lower_bound(start);
    if (next != free_.end() && start + size == next->first) {
      size += next->second;
      next = free_.erase(next);
    }
    if (next != free_.begin()) {
      auto prev = std::prev(next);
      if (prev->first + prev->second == start) {
        prev->second += size;
        return;
      }
    }
    free_.emplace(start, size);
  }

  void release(std::map<std::uint64_t, Chunk>::iterator it) {
    std::uint64_t start = it->first;
    std::uint64_t padded = it->second.info.padded_size;
    current_ -= padded;
    chunks_.erase(it);
    add_free(start, padded);
  }

  HeapConfig cfg_;
  std::map<std::uint64_t, Chunk> chunks_;     // region start -> chunk
  std::map<std::uint64_t, std::uint64_t> free_; // region start -> size
  std::map<std::uint64_t, Static> statics_;
  std::unordered_set<std::uint64_t> ever_bases_;
  std::uint64_t top_;
  std::uint64_t static_top_ = kStaticBase;
  std::uint64_t current_ = 0;
  std::uint64_t peak_ = 0;
  std::uint64_t cumulative_ = 0;
  std::uint64_t wild_writes_ = 0;
  std::uint64_t cross_chunk_writes_ = 0;
  double sample_sum_ = 0.0;
  std::uint64_t samples_ = 0;
  std::vector<HeapEvent> events_;
};

} // namespace ptauth

#endif // PTAUTH_SIM_MEMORY_HPP
