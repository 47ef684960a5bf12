//===- runtime.hpp - Points-to authentication runtime -----------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// The runtime half of points-to authentication. Every heap object carries a
/// random 64-bit ID in the 8 bytes below its base; every pointer to it carries
/// AC = PAC(base, ID) in its top 16 bits. A dereference recomputes the AC
/// against the header found at the pointer's base. Interior pointers are
/// resolved by walking 16-byte aligned candidates downward until a candidate
/// authenticates, the walk exceeds the maximum distance, or a header slot
/// is unmapped. Frees authenticate exactly once, at the pointer itself.
///
/// Detection decisions use only the pointer bits, header bytes and keys.
/// The heap's own bookkeeping is consulted only to label a failure
/// (use-after-free vs. wild pointer, double free vs. invalid free).
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_RUNTIME_HPP
#define PTAUTH_RUNTIME_HPP

#include "ptauth/pac.hpp"
#include "ptauth/sim_memory.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string_view>

namespace ptauth {

/// 0 marks a freed or never-initialised header.
struct ObjectId {
  std::uint64_t value = 0;
  constexpr bool valid() const { return value != 0; }
  friend constexpr auto operator<=>(ObjectId, ObjectId) = default;
};

enum class CheckOutcome : std::uint8_t {
  OkAt,
  /// Unsigned pointer into the static segment. Globals are never freed, so
  /// there is nothing to authenticate.
  OkStatic,
  /// Fixed-cycle estimate mode only: the first candidate missed and the
  /// sub-object search is switched off.
  Skipped,
  UseAfterFree,
  DoubleFree,
  InvalidFree,
  WildPointer,
};

constexpr bool is_violation(CheckOutcome o) {
  return o != CheckOutcome::OkAt && o != CheckOutcome::OkStatic && o != CheckOutcome::Skipped;
}

inline std::string_view to_string(CheckOutcome o) {
  switch (o) {
  case CheckOutcome::OkAt: return "ok";
  case CheckOutcome::OkStatic: return "ok_static";
  case CheckOutcome::Skipped: return "skipped";
  case CheckOutcome::UseAfterFree: return "use_after_free";
  case CheckOutcome::DoubleFree: return "double_free";
  case CheckOutcome::InvalidFree: return "invalid_free";
  case CheckOutcome::WildPointer: return "wild_pointer";
  }
  return "?";
}

struct CheckResult {
  CheckOutcome outcome = CheckOutcome::WildPointer;
  RawAddress base;
  std::uint64_t backward_steps = 0;

  bool ok() const { return !is_violation(outcome); }
};

/// How runtime work is charged. SoftwareAc prices each sign/auth like the
/// software PACIA routine; FixedCycle4 prices it at 4 units and turns the
/// backward search off, as a hardware-PAC estimate.
enum class CostAccounting : std::uint8_t { SoftwareAc, FixedCycle4 };

struct CostModel {
  std::uint64_t software_pac = 8; // and/and/xor/shift/or plus call and return
  std::uint64_t fixed_cycle_pac = 4;
  std::uint64_t header_access = 1;
  std::uint64_t gate = 1;
  std::uint64_t id_generation = 1;
  std::uint64_t strip = 1;
};

struct RuntimeConfig {
  std::uint64_t max_backward_distance = 4096; // multiple of 16
  PacMode pac_mode = PacMode::V83_Poison;
  AcFunction ac_function = AcFunction::KeyedMixer;
  KeySlot key_slot = KeySlot::DA;
  std::uint64_t seed = 1;
  std::uint64_t sample_interval = 1000; // program instructions per usage sample
  CostAccounting accounting = CostAccounting::SoftwareAc;
  CostModel cost;
};

struct RuntimeCounters {
  std::uint64_t checks = 0;
  std::uint64_t frees = 0;
  std::uint64_t allocations = 0;
  std::uint64_t backward_steps = 0;
  std::uint64_t sign_ops = 0;
  std::uint64_t auth_ops = 0;
  std::uint64_t masked_faults = 0; ///< v8.6 faults swallowed inside a search
  std::uint64_t cost_units = 0;
  std::uint64_t backward_cost_units = 0;
  std::uint64_t check_cost_units = 0; ///< everything charged inside check()
  /// Candidates beyond the first inspected by free/realloc; stays 0 because
  /// the free path authenticates exactly once.
  std::uint64_t free_backward_steps = 0;
  std::map<std::uint64_t, std::uint64_t> step_histogram; ///< steps -> checks
};

class Runtime {
public:
  Runtime(Heap &heap, RuntimeConfig cfg)
      : heap_(heap), cfg_(cfg), keys_(derive_keys(cfg.seed)), ids_(id_seed(cfg.seed)) {}

  const RuntimeConfig &config() const { return cfg_; }
  const RuntimeCounters &counters() const { return counters_; }
  Heap &heap() { return heap_; }

  /// Observer for every candidate base the backward search inspects.
  void set_candidate_observer(std::function<void(RawAddress)> fn) { observer_ = std::move(fn); }

  /// Allocates, stamps a fresh nonzero ID and returns PAC(base, ID).
  SignedPointer malloc(std::uint64_t size) {
    RawAddress base = heap_.alloc(size);
    ++counters_.allocations;
    return stamp(base);
  }

  /// Points-to authentication with backward search.
  CheckResult check(SignedPointer sp) {
    std::uint64_t before = counters_.cost_units;
    CheckResult r = check_impl(sp);
    counters_.check_cost_units += counters_.cost_units - before;
    return r;
  }

  /// One authentication at the pointer itself; on success the ID is zeroed
  /// and the chunk released. A failed free releases nothing.
  CheckResult free(SignedPointer sp) {
    ++counters_.frees;
    charge(cfg_.cost.gate);
    RawAddress p = pac_strip(sp);
    if (!authenticate_base(sp, p))
      return {classify_free(sp, p), p, 0};
    heap_.write_u64(RawAddress(p.value - kHeaderBytes), 0);
    charge(cfg_.cost.header_access);
    heap_.free(p);
    return {CheckOutcome::OkAt, p, 0};
  }

  struct ReallocResult {
    CheckResult auth;
    SignedPointer pointer;
    bool moved = false;
  };

  /// Authenticates like free, then resizes. The ID is refreshed whether or
  /// not the object moved, so every pre-existing copy of the pointer goes
  /// stale.
  ReallocResult realloc(SignedPointer sp, std::uint64_t new_size) {
    charge(cfg_.cost.gate);
    RawAddress p = pac_strip(sp);
    if (!authenticate_base(sp, p))
      return {{classify_free(sp, p), p, 0}, sp, false};
    heap_.write_u64(RawAddress(p.value - kHeaderBytes), 0);
    charge(cfg_.cost.header_access);
    auto r = heap_.realloc(p, new_size);
    // authenticate_base succeeded, so p is a live base.
    RawAddress nb = r ? r->base : p;
    ++counters_.allocations;
    return {{CheckOutcome::OkAt, p, 0}, stamp(nb), r && r->moved};
  }

  struct StripResult {
    CheckResult check;
    RawAddress address;
  };

  /// Authenticate-then-strip for a pointer flowing into uninstrumented code.
  StripResult strip_external(SignedPointer sp) {
    CheckResult c = check(sp);
    charge(cfg_.cost.strip);
    return {c, pac_strip(sp)};
  }

  /// Strip only; used where a separate CHECK already authenticated.
  RawAddress strip_for_external(SignedPointer sp) {
    charge(cfg_.cost.strip);
    return pac_strip(sp);
  }

  /// check() without any effect on counters.
  CheckResult probe(SignedPointer sp) {
    RuntimeCounters saved = counters_;
    CheckResult r = check(sp);
    counters_ = std::move(saved);
    return r;
  }

  /// Re-signs a raw pointer handed back by uninstrumented code. Only live
  /// chunk bases (or static addresses, returned unsigned) are accepted.
  std::optional<SignedPointer> resign_external(RawAddress addr) {
    charge(cfg_.cost.gate);
    if (heap_.is_static(addr))
      return SignedPointer(addr, AuthCode(0));
    auto chunk = heap_.chunk_of(addr);
    if (!chunk || chunk->base != addr)
      return std::nullopt;
    auto id = read_id(addr);
    if (!id || !id->valid())
      return std::nullopt;
    return sign(addr, *id);
  }

  /// Attacker model: writes \p sprayed_id at \p where (any address) and then
  /// authenticates \p sp as a dereference would.
  CheckResult id_spray_probe(SignedPointer sp, ObjectId sprayed_id, RawAddress where) {
    heap_.write_u64(where, sprayed_id.value);
    return check(sp);
  }

  /// Header contents at base - 8, or nullopt if the slot is unmapped.
  std::optional<ObjectId> read_id(RawAddress base) {
    if (base.value < kHeaderBytes)
      return std::nullopt;
    charge(cfg_.cost.header_access);
    auto v = heap_.read_u64(RawAddress(base.value - kHeaderBytes));
    if (!v)
      return std::nullopt;
    return ObjectId{*v};
  }

private:
  CheckResult check_impl(SignedPointer sp) {
    ++counters_.checks;
    charge(cfg_.cost.gate);
    RawAddress p = pac_strip(sp);
    if (sp.ac().value == 0 && heap_.is_static(p))
      return record({CheckOutcome::OkStatic, p, 0});

    const bool estimate = cfg_.accounting == CostAccounting::FixedCycle4;
    std::uint64_t start = p.value & ~(kAlignment - 1);
    std::uint64_t inspected = 0;
    // Unsigned wrap below zero makes start - c huge, which also ends the walk.
    for (std::uint64_t c = start; start - c <= cfg_.max_backward_distance && c >= kHeaderBytes;
         c -= kAlignment) {
      std::uint64_t steps = inspected++;
      if (observer_)
        observer_(RawAddress(c));
      bool matched = false;
      bool header_mapped = try_candidate(sp, RawAddress(c), steps > 0, matched);
      if (matched) {
        counters_.backward_steps += steps;
        return record({CheckOutcome::OkAt, RawAddress(c), steps});
      }
      if (!header_mapped)
        break;
      if (estimate)
        return record({CheckOutcome::Skipped, p, 0});
    }
    std::uint64_t steps = inspected ? inspected - 1 : 0;
    counters_.backward_steps += steps;
    return record({classify_deref(p), p, steps});
  }


  static std::uint64_t id_seed(std::uint64_t seed) { return detail::mix64(seed ^ 0x1d5a11ce0b1ec7ull); }

  const Key128 &key() const { return keys_.key(cfg_.key_slot); }

  std::uint64_t pac_cost() const {
    return cfg_.accounting == CostAccounting::FixedCycle4 ? cfg_.cost.fixed_cycle_pac
                                                          : cfg_.cost.software_pac;
  }

  void charge(std::uint64_t units) { counters_.cost_units += units; }

  SignedPointer sign(RawAddress base, ObjectId id) {
    ++counters_.sign_ops;
    charge(pac_cost());
    return pac_sign(base, id.value, key(), cfg_.ac_function);
  }

  SignedPointer stamp(RawAddress base) {
    ObjectId id;
    do {
      id.value = ids_();
    } while (!id.valid());
    charge(cfg_.cost.id_generation + cfg_.cost.header_access);
    heap_.write_u64(RawAddress(base.value - kHeaderBytes), id.value);
    return sign(base, id);
  }

  /// Authenticates sp's AC as if \p base were the object base. Returns
  /// whether the header slot was mapped; \p matched reports success.
  bool try_candidate(SignedPointer sp, RawAddress base, bool backward, bool &matched) {
    std::uint64_t before = counters_.cost_units;
    ++candidates_;
    matched = false;
    auto id = read_id(base);
    if (id && id->valid()) {
      ++counters_.auth_ops;
      charge(pac_cost());
      AuthResult r = pac_auth(SignedPointer(base, sp.ac()), id->value, key(), cfg_.pac_mode,
                              cfg_.ac_function);
      matched = r.ok();
      if (r.status == AuthResult::Status::Fault)
        ++counters_.masked_faults;
    }
    if (backward)
      counters_.backward_cost_units += counters_.cost_units - before;
    return id.has_value();
  }

  bool authenticate_base(SignedPointer sp, RawAddress p) {
    std::uint64_t before = candidates_;
    bool matched = false;
    if (p.value % kAlignment == 0)
      try_candidate(sp, p, false, matched);
    std::uint64_t inspected = candidates_ - before;
    counters_.free_backward_steps += inspected > 1 ? inspected - 1 : 0;
    return matched;
  }

  CheckResult record(CheckResult r) {
    ++counters_.step_histogram[r.backward_steps];
    return r;
  }

  CheckOutcome classify_deref(RawAddress p) const {
    return heap_.in_heap_span(p) ? CheckOutcome::UseAfterFree : CheckOutcome::WildPointer;
  }

  /// Names a refused free. The decision is already made, so this is a
  /// diagnostic: no search and no charge. A pointer whose code belongs to
  /// the live chunk around it is a mid-object free; otherwise an address
  /// that was once a base is a stale double free.
  CheckOutcome classify_free(SignedPointer sp, RawAddress p) {
    if (auto c = heap_.chunk_of(p); c && c->live && c->base != p) {
      auto id = heap_.read_u64(RawAddress(c->base.value - kHeaderBytes));
      if (id && *id != 0 &&
          pac_auth(SignedPointer(c->base, sp.ac()), *id, key(), PacMode::V86_Fault, cfg_.ac_function).ok())
        return CheckOutcome::InvalidFree;
    }
    return heap_.was_base(p) ? CheckOutcome::DoubleFree : CheckOutcome::InvalidFree;
  }

  Heap &heap_;
  RuntimeConfig cfg_;
  KeySet keys_;
  std::mt19937_64 ids_;
  RuntimeCounters counters_;
  std::function<void(RawAddress)> observer_;
  std::uint64_t candidates_ = 0;
};

} // namespace ptauth

#endif // PTAUTH_RUNTIME_HPP
