//===- corpus.hpp - Temporal-bug corpus and robustness cases ----*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Seeded generator for vulnerable/patched program pairs covering
/// use-after-free (CWE-416), double free (CWE-415) and invalid free
/// (CWE-761), a runner that scores detections, and adversarial cases that
/// corrupt object headers or spray IDs before a temporal bug fires.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_CORPUS_HPP
#define PTAUTH_CORPUS_HPP

#include "ptauth/instrumenter.hpp"
#include "ptauth/interpreter.hpp"
#include "ptauth/parser.hpp"
#include "ptauth/sim_memory.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ptauth {

enum class BugCategory : std::uint8_t { UseAfterFree, DoubleFree, InvalidFree };
enum class Variant : std::uint8_t { Vulnerable, Patched };

inline std::string_view to_string(BugCategory c) {
  switch (c) {
  case BugCategory::UseAfterFree: return "uaf";
  case BugCategory::DoubleFree: return "double_free";
  case BugCategory::InvalidFree: return "invalid_free";
  }
  return "?";
}

inline std::string_view cwe(BugCategory c) {
  switch (c) {
  case BugCategory::UseAfterFree: return "CWE-416";
  case BugCategory::DoubleFree: return "CWE-415";
  case BugCategory::InvalidFree: return "CWE-761";
  }
  return "?";
}

inline std::string_view to_string(Variant v) { return v == Variant::Vulnerable ? "vulnerable" : "patched"; }

inline CheckOutcome expected_outcome(BugCategory c) {
  switch (c) {
  case BugCategory::UseAfterFree: return CheckOutcome::UseAfterFree;
  case BugCategory::DoubleFree: return CheckOutcome::DoubleFree;
  case BugCategory::InvalidFree: return CheckOutcome::InvalidFree;
  }
  return CheckOutcome::WildPointer;
}

struct CorpusCase {
  std::string id;
  BugCategory category = BugCategory::UseAfterFree;
  Variant variant = Variant::Vulnerable;
  std::string pattern;
  std::string text;

  /// Vulnerable cases expect a violation of their category; patched ones
  /// expect a clean run.
  bool expects_violation() const { return variant == Variant::Vulnerable; }
};

struct CorpusCounts {
  std::size_t uaf = 50;
  std::size_t double_free = 50;
  std::size_t invalid_free = 50;
};

namespace detail {

class CaseWriter {
public:
  explicit CaseWriter(std::mt19937_64 &rng) : rng_(rng) {}

  std::uint64_t pick(std::uint64_t n) { return n ? rng_() % n : 0; }
  std::uint64_t size() {
    static constexpr std::uint64_t sizes[] = {16, 24, 32, 40, 48, 64, 96, 128, 200, 256};
    return sizes[pick(std::size(sizes))];
  }
  /// 8-aligned in-bounds offset for an 8-byte access.
  std::uint64_t offset(std::uint64_t size) { return pick(size / 8) * 8; }

  void line(const std::string &s) { body_ << "  " << s << "\n"; }
  void label(const std::string &s) { body_ << s << ":\n"; }

  /// Benign traffic on a private object.
  void filler() {
    std::uint64_t n = pick(4);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint64_t off = pick(8) * 8;
      if (pick(2)) {
        line("store [fill + " + std::to_string(off) + "], " + std::to_string(pick(1000)));
      } else {
        line("t" + std::to_string(tmp_) + " = load [fill + " + std::to_string(off) + "]");
        ++tmp_;
      }
    }
  }

  void begin() {
    body_.str({});
    tmp_ = 0;
    helpers_.clear();
    globals_.clear();
    line("fill = alloc 64");
    filler();
  }

  void helper(const std::string &text) { helpers_ += text + "\n"; }
  void global(const std::string &name, std::uint64_t size) {
    globals_ += "global " + name + " " + std::to_string(size) + "\n";
  }

  std::string finish(const std::string &ret) {
    filler();
    line("ret " + ret);
    std::string out = globals_;
    if (!globals_.empty())
      out += "\n";
    out += helpers_;
    out += "fn main {\n" + body_.str() + "}\n";
    return out;
  }

private:
  std::mt19937_64 &rng_;
  std::ostringstream body_;
  std::string helpers_;
  std::string globals_;
  unsigned tmp_ = 0;
};

inline const char *kRelease = "fn release(x) {\n  free x\n  ret\n}\n";

using Template = std::function<std::string(CaseWriter &, bool vulnerable)>;

struct NamedTemplate {
  const char *name;
  Template make;
};

inline std::string num(std::uint64_t v) { return std::to_string(v); }

inline std::string pad3(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
}

inline std::vector<NamedTemplate> uaf_templates() {
  return {
      {"alias_free_use",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size(), o = w.offset(s);
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("store [p + " + num(o) + "], 42");
         w.line("a = copy p");
         w.filler();
         if (!vuln)
           w.line("x = load [a + " + num(o) + "]");
         w.line("free p");
         w.filler();
         if (vuln)
           w.line("x = load [a + " + num(o) + "]");
         return w.finish("x");
       }},
      {"reuse_same_slot",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("a = copy p");
         w.line("store [p], 7");
         w.line("free p");
         w.line("q = alloc " + num(s));
         w.line("store [q], 9");
         w.line(vuln ? "x = load [a]" : "x = load [q]");
         return w.finish("x");
       }},
      {"interior_after_free",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size(), k = w.offset(s);
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("i = ptradd p, " + num(k));
         w.line("store [i], 5");
         if (!vuln)
           w.line("x = load [i]");
         w.line("free p");
         w.filler();
         if (vuln)
           w.line("x = load [i]");
         return w.finish("x");
       }},
      {"realloc_stale",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size(), s2 = w.size();
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("store [p], 3");
         w.line("q = realloc p, " + num(s2));
         w.line(vuln ? "x = load [p]" : "x = load [q]");
         w.line("free q");
         return w.finish("x");
       }},
      {"opaque_free_then_use",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("store.1 [p], 65");
         w.line("store.1 [p + 1], 0");
         if (!vuln)
           w.line("extcall print_str(p)");
         w.line("extcall opaque_free(p)");
         if (vuln)
           w.line("extcall print_str(p)");
         return w.finish("0");
       }},
      {"callee_frees",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size(), o = w.offset(s);
         w.begin();
         w.helper(kRelease);
         w.line("p = alloc " + num(s));
         w.line("store [p + " + num(o) + "], 1");
         if (!vuln)
           w.line("y = load [p + " + num(o) + "]");
         w.line("call release(p)");
         if (vuln)
           w.line("y = load [p + " + num(o) + "]");
         return w.finish("y");
       }},
      {"pointer_in_memory",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.line("h = alloc 16");
         w.line("p = alloc " + num(s));
         w.line("store [h], p");
         w.line("store [p], 8");
         if (vuln)
           w.line("free p");
         w.line("r = load [h]");
         w.line("x = load [r]");
         if (!vuln)
           w.line("free p");
         return w.finish("x");
       }},
      {"conditional_free",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.line("p = alloc " + num(s));
         w.line(std::string("c = cmp eq ") + (vuln ? "1" : "0") + ", 1");
         w.line("cbr c, gone, kept");
         w.label("gone");
         w.line("free p");
         w.line("br use");
         w.label("kept");
         w.line("store [p], 4");
         w.label("use");
         w.line("x = load [p]");
         return w.finish("x");
       }},
  };
}

inline std::vector<NamedTemplate> double_free_templates() {
  return {
      {"alias_double_free",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.line("p = alloc " + num(w.size()));
         w.line("a = copy p");
         w.line("store [a], 1");
         w.line("free p");
         w.filler();
         if (vuln)
           w.line("free a");
         return w.finish("0");
       }},
      {"callee_and_caller",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.helper(kRelease);
         w.line("p = alloc " + num(w.size()));
         w.line("call release(p)");
         if (vuln)
           w.line("free p");
         return w.finish("0");
       }},
      {"realloc_then_free_old",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.line("p = alloc " + num(w.size()));
         w.line("q = realloc p, " + num(w.size()));
         w.line(vuln ? "free p" : "free q");
         return w.finish("0");
       }},
      {"opaque_then_free",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.line("p = alloc " + num(w.size()));
         w.line("extcall opaque_free(p)");
         if (vuln)
           w.line("free p");
         return w.finish("0");
       }},
      {"free_through_memory",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.line("h = alloc 16");
         w.line("p = alloc " + num(w.size()));
         w.line("store [h], p");
         w.line("free p");
         w.line("r = load [h]");
         w.line(vuln ? "free r" : "free h");
         return w.finish("0");
       }},
      {"free_in_loop",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.line("p = alloc " + num(w.size()));
         w.line(std::string("n = const ") + (vuln ? "2" : "1"));
         w.label("again");
         w.line("free p");
         w.line("n = sub n, 1");
         w.line("c = cmp gt n, 0");
         w.line("cbr c, again, done");
         w.label("done");
         return w.finish("0");
       }},
  };
}

inline std::vector<NamedTemplate> invalid_free_templates() {
  return {
      {"walked_pointer",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = std::max<std::uint64_t>(w.size(), 24);
         std::uint64_t steps = 1 + w.pick(s / 8 - 1);
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("w = copy p");
         w.line("n = const " + num(steps));
         w.label("walk");
         w.line("store [w], n");
         w.line("w = ptradd w, 8");
         w.line("n = sub n, 1");
         w.line("c = cmp gt n, 0");
         w.line("cbr c, walk, clean");
         w.label("clean");
         w.line(vuln ? "free w" : "free p");
         return w.finish("0");
       }},
      {"offset_pointer",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         std::uint64_t k = 1 + w.pick(s - 1);
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("q = ptradd p, " + num(k));
         w.line(vuln ? "free q" : "free p");
         return w.finish("0");
       }},
      {"global_address",
       [](CaseWriter &w, bool vuln) {
         w.begin();
         w.global("buf", 64);
         w.line("p = alloc " + num(w.size()));
         w.line("g = globaddr buf");
         w.line("store [g], 1");
         w.line(vuln ? "free g" : "free p");
         return w.finish("0");
       }},
      {"callee_frees_interior",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.helper(kRelease);
         w.line("p = alloc " + num(s));
         w.line("q = ptradd p, " + num(1 + w.pick(s - 1)));
         w.line(vuln ? "call release(q)" : "call release(p)");
         return w.finish("0");
       }},
      {"realloc_interior",
       [](CaseWriter &w, bool vuln) {
         std::uint64_t s = w.size();
         w.begin();
         w.line("p = alloc " + num(s));
         w.line("q = ptradd p, " + num(1 + w.pick(s - 1)));
         w.line(std::string("r = realloc ") + (vuln ? "q" : "p") + ", " + num(w.size()));
         w.line("free r");
         return w.finish("0");
       }},
  };
}

} // namespace detail

/// Same seed and counts give a byte-identical corpus.
inline std::vector<CorpusCase> gen_corpus(std::uint64_t seed, const CorpusCounts &counts = {}) {
  if (!counts.uaf || !counts.double_free || !counts.invalid_free)
    throw std::invalid_argument("corpus counts must be at least 1 per category");
  std::vector<CorpusCase> out;
  std::mt19937_64 rng(seed);
  detail::CaseWriter w(rng);
  auto emit = [&](BugCategory cat, const std::vector<detail::NamedTemplate> &ts, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto &t = ts[i % ts.size()];
      std::string base = std::string(to_string(cat)) + "-" + detail::pad3(i);
      // Both variants draw the same parameters.
      std::mt19937_64 snapshot = rng;
      std::string vuln = t.make(w, true);
      rng = snapshot;
      std::string patched = t.make(w, false);
      out.push_back({base + "-vulnerable", cat, Variant::Vulnerable, t.name, std::move(vuln)});
      out.push_back({base + "-patched", cat, Variant::Patched, t.name, std::move(patched)});
    }
  };
  emit(BugCategory::UseAfterFree, detail::uaf_templates(), counts.uaf);
  emit(BugCategory::DoubleFree, detail::double_free_templates(), counts.double_free);
  emit(BugCategory::InvalidFree, detail::invalid_free_templates(), counts.invalid_free);
  return out;
}

struct CorpusRunConfig {
  RuntimeConfig runtime;
  bool optimize = true;
};

struct CaseResult {
  std::string id;
  bool pass = false;
  Verdict verdict;
  std::uint64_t frees = 0;
  std::uint64_t free_backward_steps = 0;
  std::string reason;
};

struct CategoryStats {
  std::size_t vulnerable = 0;
  std::size_t detected = 0;
  std::size_t patched = 0;
  std::size_t false_positives = 0;

  double detection_rate() const { return vulnerable ? double(detected) / double(vulnerable) : 1.0; }
  double false_positive_rate() const { return patched ? double(false_positives) / double(patched) : 0.0; }
};

struct CorpusSummary {
  std::array<CategoryStats, 3> categories{};
  std::vector<CaseResult> results;
  std::uint64_t frees = 0;
  std::uint64_t free_backward_steps = 0;

  bool pass() const {
    for (const auto &r : results)
      if (!r.pass)
        return false;
    return true;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> f;
    for (const auto &r : results)
      if (!r.pass)
        f.push_back(r.id + ": " + r.reason);
    return f;
  }
};

inline CaseResult run_case(const CorpusCase &c, const CorpusRunConfig &cfg) {
  CaseResult r;
  r.id = c.id;
  ir::ParseResult parsed = ir::parse_program(c.text);
  if (!parsed.ok()) {
    r.reason = "parse error: " + ir::format(parsed.diagnostics.front());
    return r;
  }
  InstrumentOptions io;
  io.optimize = cfg.optimize;
  InstrumentResult inst = instrument(parsed.program, io);
  RunOptions ro;
  ro.mode = ExecMode::Checked;
  ro.runtime = cfg.runtime;
  RunReport rep = interpret(inst.program, ro);
  r.verdict = rep.verdict;
  r.frees = rep.frees;
  r.free_backward_steps = rep.free_backward_steps;
  if (c.expects_violation()) {
    CheckOutcome want = expected_outcome(c.category);
    r.pass = rep.verdict.is_violation() && rep.verdict.violation == want;
    if (!r.pass)
      r.reason = "expected " + std::string(to_string(want)) + ", got " +
                 std::string(to_string(rep.verdict.kind)) +
                 (rep.verdict.is_violation() ? "/" + std::string(to_string(rep.verdict.violation)) : "");
  } else {
    r.pass = rep.verdict.clean();
    if (!r.pass)
      r.reason = "expected clean, got " + std::string(to_string(rep.verdict.kind)) + "/" +
                 std::string(to_string(rep.verdict.violation)) + " " + rep.verdict.detail;
  }
  return r;
}

/// Runs every case in checked mode and scores it against its expectation.
inline CorpusSummary run_corpus(const std::vector<CorpusCase> &cases, const CorpusRunConfig &cfg = {}) {
  CorpusSummary s;
  for (const auto &c : cases) {
    CaseResult r = run_case(c, cfg);
    CategoryStats &st = s.categories[static_cast<std::size_t>(c.category)];
    if (c.expects_violation()) {
      ++st.vulnerable;
      st.detected += r.pass;
    } else {
      ++st.patched;
      st.false_positives += r.verdict.is_violation();
    }
    s.frees += r.frees;
    s.free_backward_steps += r.free_backward_steps;
    s.results.push_back(std::move(r));
  }
  return s;
}

// Robustness ----------------------------------------------------------------------

enum class AttackKind : std::uint8_t { HeaderOverwrite, IdReplay, IdSpray, DataOnly };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
  case AttackKind::HeaderOverwrite: return "header_overwrite";
  case AttackKind::IdReplay: return "id_replay";
  case AttackKind::IdSpray: return "id_spray";
  case AttackKind::DataOnly: return "data_only";
  }
  return "?";
}

struct RobustnessCase {
  std::string id;
  AttackKind kind;
  std::string text;
  bool expects_violation() const { return kind != AttackKind::DataOnly; }
};

namespace detail {

/// Offset from a base to the header of the chunk placed right after it.
inline std::uint64_t next_header_offset(std::uint64_t size) {
  return chunk_footprint(size, true) - kHeaderBytes;
}

} // namespace detail

/// Layouts assume the checked heap: objects allocated back to back from an
/// empty heap, each chunk holding its 8-byte header just below the base.
inline std::vector<RobustnessCase> gen_robustness(std::uint64_t seed, std::size_t per_kind = 10) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t n) { return rng() % n; };
  static constexpr std::uint64_t sizes[] = {16, 24, 40, 56, 64, 96, 128, 200};
  auto size = [&] { return sizes[pick(std::size(sizes))]; };
  std::vector<RobustnessCase> out;
  auto id = [](AttackKind k, std::size_t i) { return std::string(to_string(k)) + "-" + detail::pad3(i); };

  for (std::size_t i = 0; i < per_kind; ++i) {
    // Overflow a neighbour into the reused chunk's header, then use a stale
    // pointer to that chunk.
    std::uint64_t sg = size(), sv = size();
    std::uint64_t junk = 0x4141414141414141ull ^ (rng() & 0xffffull);
    std::ostringstream p;
    p << "fn main {\n"
      << "  g = alloc " << sg << "\n"
      << "  v = alloc " << sv << "\n"
      << "  s = copy v\n"
      << "  store [v], 11\n"
      << "  free v\n"
      << "  n = alloc " << sv << "\n"
      << "  o = ptradd g, " << detail::next_header_offset(sg) << "\n"
      << "  store [o], " << static_cast<std::int64_t>(junk) << "\n"
      << "  x = load [s]\n"
      << "  ret x\n}\n";
    out.push_back({id(AttackKind::HeaderOverwrite, i), AttackKind::HeaderOverwrite, p.str()});
  }

  for (std::size_t i = 0; i < per_kind; ++i) {
    // Leak the victim's ID, let a larger object take over the victim's
    // memory at a lower base, and plant the old ID in the new header.
    std::uint64_t sg = size(), sa = size(), sv = size();
    std::ostringstream p;
    p << "fn main {\n"
      << "  g = alloc " << sg << "\n"
      << "  a = alloc " << sa << "\n"
      << "  v = alloc " << sv << "\n"
      << "  s = ptradd v, " << pick(sv / 8) * 8 << "\n"
      << "  h = ptradd a, " << detail::next_header_offset(sa) << "\n"
      << "  old = load [h]\n"
      << "  free a\n"
      << "  free v\n"
      << "  n = alloc " << sa + sv << "\n"
      << "  o = ptradd g, " << detail::next_header_offset(sg) << "\n"
      << "  store [o], old\n"
      << "  x = load [s]\n"
      << "  ret x\n}\n";
    out.push_back({id(AttackKind::IdReplay, i), AttackKind::IdReplay, p.str()});
  }

  for (std::size_t i = 0; i < per_kind; ++i) {
    // Dangling interior pointer; the old ID is sprayed at every aligned
    // candidate between the old base and the pointer.
    std::uint64_t sg = size();
    std::uint64_t sv = 64 + pick(4) * 32;
    std::uint64_t k = 32 + pick((sv - 40) / 8) * 8;
    std::ostringstream p;
    p << "fn main {\n"
      << "  g = alloc " << sg << "\n"
      << "  v = alloc " << sv << "\n"
      << "  q = ptradd v, " << k << "\n"
      << "  h = ptradd g, " << detail::next_header_offset(sg) << "\n"
      << "  old = load [h]\n"
      << "  free v\n"
      << "  n = alloc " << sv << "\n";
    for (std::uint64_t c = 16; c <= k; c += 16)
      p << "  store [n + " << c - 8 << "], old\n";
    p << "  x = load [q]\n"
      << "  ret x\n}\n";
    out.push_back({id(AttackKind::IdSpray, i), AttackKind::IdSpray, p.str()});
  }

  for (std::size_t i = 0; i < 3 * per_kind; ++i) {
    // Bug-free: overflow reaches only the neighbour's data or the
    // overflowing object's own padding; IDs sprayed into live data.
    std::uint64_t sg = size(), sv = std::max<std::uint64_t>(size(), 32);
    std::uint64_t into = detail::next_header_offset(sg) + 8 + pick(sv / 8) * 8;
    std::ostringstream p;
    p << "fn main {\n"
      << "  g = alloc " << sg << "\n"
      << "  v = alloc " << sv << "\n"
      << "  q = ptradd v, " << (sv / 16) * 16 - 8 << "\n";
    switch (i % 3) {
    case 0:
      p << "  o = ptradd g, " << into << "\n"
        << "  store [o], " << rng() % 100000 << "\n";
      break;
    case 1:
      p << "  h = ptradd g, " << detail::next_header_offset(sg) << "\n"
        << "  id = load [h]\n";
      for (std::uint64_t c = 16; c + 8 <= sv; c += 16)
        p << "  store [v + " << c - 8 << "], id\n";
      break;
    default:
      // Last byte of g's padding, or of its data when there is no padding.
      p << "  o = ptradd g, " << detail::next_header_offset(sg) - 1 << "\n"
        << "  store.1 [o], 255\n";
      break;
    }
    p << "  x = load [q]\n"
      << "  store [v], x\n"
      << "  free v\n"
      << "  free g\n"
      << "  ret x\n}\n";
    out.push_back({id(AttackKind::DataOnly, i), AttackKind::DataOnly, p.str()});
  }
  return out;
}

struct RobustnessSummary {
  std::size_t attacks = 0;
  std::size_t detected = 0;
  std::size_t clean_cases = 0;
  std::size_t false_positives = 0;
  std::vector<std::string> failures;

  bool pass() const { return failures.empty(); }
};

inline RobustnessSummary run_robustness(std::uint64_t seed, std::size_t per_kind = 10,
                                        const CorpusRunConfig &cfg = {}) {
  RobustnessSummary s;
  for (const auto &c : gen_robustness(seed, per_kind)) {
    ir::Program prog = ir::parse_program_or_throw(c.text);
    InstrumentOptions io;
    io.optimize = cfg.optimize;
    RunOptions ro;
    ro.mode = ExecMode::Checked;
    ro.runtime = cfg.runtime;
    RunReport rep = interpret(instrument(prog, io).program, ro);
    if (c.expects_violation()) {
      ++s.attacks;
      if (rep.verdict.is_violation())
        ++s.detected;
      else
        s.failures.push_back(c.id + ": undetected (" + std::string(to_string(rep.verdict.kind)) + ")");
    } else {
      ++s.clean_cases;
      if (!rep.verdict.clean()) {
        ++s.false_positives;
        s.failures.push_back(c.id + ": false positive (" + std::string(to_string(rep.verdict.violation)) +
                             ")");
      }
    }
  }
  return s;
}

} // namespace ptauth

#endif // PTAUTH_CORPUS_HPP
