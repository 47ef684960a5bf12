//===- pac.hpp - Software pointer authentication codes ----------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Software emulation of the pointer-authentication instruction subset used
/// for points-to authentication: sign (PACIA/PACDA analog), authenticate
/// (AUTIA/AUTDA analog) and strip (XPAC analog).
///
/// A signed pointer keeps a 48-bit address in its low bits and a 16-bit
/// authentication code in bits 63..48. Authentication failures are returned
/// in-band, either as a poisoned pointer (v8.3 behaviour) or as a fault
/// value (v8.6 behaviour), so callers can observe a failure and keep going.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_PAC_HPP
#define PTAUTH_PAC_HPP

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ptauth {

inline constexpr unsigned kAddressBits = 48;
inline constexpr std::uint64_t kAddressMask = (std::uint64_t{1} << kAddressBits) - 1;

/// A 48-bit simulated address. The high 16 bits are zero when canonical.
struct RawAddress {
  std::uint64_t value = 0;

  constexpr RawAddress() = default;
  constexpr explicit RawAddress(std::uint64_t v) : value(v) {}

  constexpr bool canonical() const { return (value & ~kAddressMask) == 0; }
  friend constexpr auto operator<=>(RawAddress, RawAddress) = default;
};

struct AuthCode {
  std::uint16_t value = 0;

  constexpr AuthCode() = default;
  constexpr explicit AuthCode(std::uint16_t v) : value(v) {}
  friend constexpr auto operator<=>(AuthCode, AuthCode) = default;
};

/// (AC << 48) | address.
struct SignedPointer {
  std::uint64_t bits = 0;

  constexpr SignedPointer() = default;
  constexpr explicit SignedPointer(std::uint64_t b) : bits(b) {}
  constexpr SignedPointer(RawAddress addr, AuthCode ac)
      : bits((std::uint64_t{ac.value} << kAddressBits) | (addr.value & kAddressMask)) {}

  constexpr AuthCode ac() const { return AuthCode(static_cast<std::uint16_t>(bits >> kAddressBits)); }
  constexpr RawAddress address() const { return RawAddress(bits & kAddressMask); }
  friend constexpr auto operator<=>(SignedPointer, SignedPointer) = default;
};

struct Key128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend constexpr bool operator==(const Key128 &, const Key128 &) = default;
};

enum class KeySlot : std::uint8_t { IA, IB, DA, DB, GA };

/// The five architectural key registers. Only the runtime holds a KeySet;
/// nothing reachable from a simulated program hands key material back.
class KeySet {
public:
  KeySet() = default;

  const Key128 &key(KeySlot slot) const { return keys_[static_cast<std::size_t>(slot)]; }

  friend bool operator==(const KeySet &, const KeySet &) = default;

private:
  friend KeySet derive_keys(std::uint64_t seed);
  std::array<Key128, 5> keys_{};
};

/// Expands \p seed into five independent 128-bit keys. Any seed is valid.
inline KeySet derive_keys(std::uint64_t seed) {
  // mt19937_64 output is fully specified by the standard, so the expansion is
  // reproducible across toolchains.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x9e3779b9u, 0x7f4a7c15u};
  std::mt19937_64 gen(seq);
  KeySet ks;
  for (auto &k : ks.keys_) {
    k.hi = gen();
    k.lo = gen();
  }
  return ks;
}

enum class PacMode : std::uint8_t { V83_Poison, V86_Fault };
enum class AcFunction : std::uint8_t { XorFold, KeyedMixer };

inline constexpr std::uint8_t kPoisonByte = 0x20;

class NonCanonicalAddress : public std::invalid_argument {
public:
  explicit NonCanonicalAddress(std::uint64_t addr)
      : std::invalid_argument("non-canonical address 0x" + to_hex(addr)), address(addr) {}

  std::uint64_t address;

private:
  static std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
      s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
  }
};

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t rotl(std::uint64_t x, unsigned r) { return (x << r) | (x >> (64 - r)); }

constexpr std::uint16_t fold16(const Key128 &k) {
  std::uint64_t x = k.hi ^ k.lo;
  x ^= x >> 32;
  x ^= x >> 16;
  return static_cast<std::uint16_t>(x);
}

} // namespace detail

/// 16-bit XOR of the eight 16-bit lanes of a key.
constexpr std::uint16_t key_fold(const Key128 &k) { return detail::fold16(k); }

/// Computes the authentication code of \p addr under \p modifier and \p key.
///
/// XorFold is the toy scheme used for software PAC on hardware without PAC:
/// low 16 bits of the address XOR low 16 bits of the modifier XOR a 16-bit
/// fold of the key. It ignores the high bits of both inputs.
///
/// KeyedMixer runs all 64 bits of address and modifier through a keyed
/// bijective mixer and keeps the top 16 bits of the result.
constexpr AuthCode compute_ac(RawAddress addr, std::uint64_t modifier, const Key128 &key,
                              AcFunction fn) {
  if (fn == AcFunction::XorFold) {
    auto v = static_cast<std::uint16_t>((addr.value & 0xffff) ^ (modifier & 0xffff) ^
                                        detail::fold16(key));
    return AuthCode(v);
  }
  std::uint64_t h = detail::mix64(addr.value ^ key.lo);
  h = detail::mix64(h ^ modifier ^ key.hi);
  h = detail::mix64(h ^ detail::rotl(key.lo, 23));
  return AuthCode(static_cast<std::uint16_t>(h >> 48));
}

/// PACIA/PACDA analog. Throws NonCanonicalAddress when the high 16 bits of
/// \p addr are not clear.
inline SignedPointer pac_sign(RawAddress addr, std::uint64_t modifier, const Key128 &key,
                              AcFunction fn = AcFunction::KeyedMixer) {
  if (!addr.canonical())
    throw NonCanonicalAddress(addr.value);
  return SignedPointer(addr, compute_ac(addr, modifier, key, fn));
}

/// XPAC analog: no key, no check.
constexpr RawAddress pac_strip(SignedPointer sp) { return sp.address(); }

struct AuthResult {
  enum class Status : std::uint8_t { Ok, Poisoned, Fault };

  Status status = Status::Fault;
  /// Stripped address on Ok, the poisoned pointer bits on Poisoned, the
  /// unmodified input on Fault.
  std::uint64_t value = 0;

  bool ok() const { return status == Status::Ok; }
  RawAddress address() const { return RawAddress(value & kAddressMask); }
};

/// AUTIA/AUTDA analog.
inline AuthResult pac_auth(SignedPointer sp, std::uint64_t modifier, const Key128 &key,
                           PacMode mode, AcFunction fn = AcFunction::KeyedMixer) {
  RawAddress addr = pac_strip(sp);
  if (sp.ac() == compute_ac(addr, modifier, key, fn))
    return {AuthResult::Status::Ok, addr.value};
  if (mode == PacMode::V83_Poison) {
    std::uint64_t poisoned = (sp.bits & ~(std::uint64_t{0xff} << 56)) |
                             (std::uint64_t{kPoisonByte} << 56);
    return {AuthResult::Status::Poisoned, poisoned};
  }
  return {AuthResult::Status::Fault, sp.bits};
}

inline std::string_view to_string(PacMode m) {
  return m == PacMode::V83_Poison ? "v83" : "v86";
}
inline std::string_view to_string(AcFunction f) {
  return f == AcFunction::XorFold ? "xorfold" : "mixer";
}
inline std::string_view to_string(KeySlot s) {
  switch (s) {
  case KeySlot::IA: return "ia";
  case KeySlot::IB: return "ib";
  case KeySlot::DA: return "da";
  case KeySlot::DB: return "db";
  case KeySlot::GA: return "ga";
  }
  return "?";
}

} // namespace ptauth

#endif // PTAUTH_PAC_HPP
