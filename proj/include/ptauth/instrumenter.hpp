//===- instrumenter.hpp - CHECK insertion and elision -----------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Inserts a CHECK before every LOAD/STORE address register and every
/// pointer argument handed to an external, and optionally elides the checks
/// that an intra-procedural safe-window analysis proves redundant.
///
/// The analysis tracks, per register, the set of definitions ("origins")
/// its value may come from. An origin is FreshSafe while the object it
/// names is known live: it came from ALLOC/REALLOC in this function or was
/// just checked, and no FREE, escaping STORE or non-whitelisted call has
/// happened since. Origins that have escaped (stored, passed out, loaded
/// from memory, received as a parameter) can be aliased by anything, so
/// any free of an escaped origin and any opaque call kills all of them.
///
/// Each defining instruction has two origin slots: the value produced by
/// its latest execution and a summary of all earlier ones. Re-executing the
/// definition in a loop folds the latest into the summary, which is never
/// treated as a single object.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_INSTRUMENTER_HPP
#define PTAUTH_INSTRUMENTER_HPP

#include "ptauth/interpreter.hpp"
#include "ptauth/ir.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptauth {

enum class SiteKind : std::uint8_t { Load, Store, ExtBoundary, Free };
enum class ElisionReason : std::uint8_t { None, SafeWindow, Global };

inline std::string_view to_string(SiteKind k) {
  switch (k) {
  case SiteKind::Load: return "load";
  case SiteKind::Store: return "store";
  case SiteKind::ExtBoundary: return "ext_boundary";
  case SiteKind::Free: return "free";
  }
  return "?";
}

inline std::string_view to_string(ElisionReason r) {
  switch (r) {
  case ElisionReason::None: return "none";
  case ElisionReason::SafeWindow: return "safe_window";
  case ElisionReason::Global: return "global";
  }
  return "?";
}

struct CheckSite {
  std::string function;
  std::size_t index = 0; ///< source instruction index
  SiteKind kind = SiteKind::Load;
  std::string reg;
  bool elided = false;
  ElisionReason reason = ElisionReason::None;
};

struct InstrumentOptions {
  bool optimize = true;
  /// Externals known never to free their arguments.
  std::set<std::string, std::less<>> whitelist = {"print_str", "mem_copy", "str_copy"};
};

struct InstrumentResult {
  ir::Program program;
  std::vector<CheckSite> sites;

  std::size_t inserted() const {
    return static_cast<std::size_t>(std::count_if(sites.begin(), sites.end(), [](const CheckSite &s) {
      return s.kind != SiteKind::Free && !s.elided;
    }));
  }
  std::size_t elided() const {
    return static_cast<std::size_t>(
        std::count_if(sites.begin(), sites.end(), [](const CheckSite &s) { return s.elided; }));
  }
  std::set<SiteKey> elided_keys() const {
    std::set<SiteKey> out;
    for (const auto &s : sites)
      if (s.elided)
        out.insert({s.function, s.index});
    return out;
  }
};

// Safe-window analysis --------------------------------------------------------

enum class Fact : std::uint8_t { Unknown, FreshSafe, Global };

inline std::string_view to_string(Fact f) {
  switch (f) {
  case Fact::Unknown: return "unknown";
  case Fact::FreshSafe: return "fresh_safe";
  case Fact::Global: return "global";
  }
  return "?";
}

struct SafeWindowFacts {
  /// facts[i][r]: fact for register r on entry to instruction i.
  std::vector<std::vector<Fact>> facts;

  Fact at(std::size_t index, std::uint32_t reg) const {
    if (index >= facts.size() || reg >= facts[index].size())
      return Fact::Unknown;
    return facts[index][reg];
  }
};

namespace detail {

struct OriginFlags {
  bool safe = false;
  bool escaped = false;
  bool global = false;
  friend bool operator==(const OriginFlags &, const OriginFlags &) = default;
};

/// Origin id = 2 * slot + (0 latest | 1 earlier). Slots are instruction
/// indices, then one per parameter, then one per check position.
using OriginId = std::uint32_t;

struct FlowState {
  bool reached = false;
  std::vector<std::vector<OriginId>> regs; // sorted
  std::map<OriginId, OriginFlags> flags;

  friend bool operator==(const FlowState &, const FlowState &) = default;
};

class SafeWindow {
public:
  SafeWindow(const ir::Function &fn, const std::set<std::string, std::less<>> &whitelist)
      : fn_(fn), whitelist_(whitelist) {}

  SafeWindowFacts run() {
    const std::size_t n = fn_.body.size();
    std::vector<FlowState> in(n + 1);
    FlowState entry;
    entry.reached = true;
    entry.regs.resize(fn_.num_regs());
    for (std::size_t k = 0; k < fn_.params.size(); ++k) {
      OriginId o = latest(static_cast<std::uint32_t>(n + k));
      entry.regs[fn_.params[k]] = {o};
      entry.flags[o] = {false, true, false};
    }
    std::deque<std::size_t> work;
    if (n) {
      in[0] = entry;
      work.push_back(0);
    }
    std::vector<bool> queued(n, false);
    if (n)
      queued[0] = true;
    while (!work.empty()) {
      std::size_t i = work.front();
      work.pop_front();
      queued[i] = false;
      FlowState out = in[i];
      transfer(i, out);
      for (std::size_t s : successors(i)) {
        if (s >= n)
          continue;
        if (meet_into(in[s], out) && !queued[s]) {
          queued[s] = true;
          work.push_back(s);
        }
      }
    }
    SafeWindowFacts f;
    f.facts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      f.facts[i].assign(fn_.num_regs(), Fact::Unknown);
      if (!in[i].reached)
        continue;
      for (std::uint32_t r = 0; r < fn_.num_regs(); ++r)
        f.facts[i][r] = classify(in[i], r);
    }
    return f;
  }

private:
  static OriginId latest(std::uint32_t slot) { return slot * 2; }
  static OriginId earlier(std::uint32_t slot) { return slot * 2 + 1; }
  static bool is_latest(OriginId o) { return (o & 1u) == 0; }

  static Fact classify(const FlowState &st, std::uint32_t r) {
    const auto &set = st.regs[r];
    if (set.empty())
      return Fact::Unknown;
    bool all_global = true;
    for (OriginId o : set) {
      const OriginFlags &f = st.flags.at(o);
      if (f.global)
        continue;
      all_global = false;
      if (!f.safe)
        return Fact::Unknown;
    }
    return all_global ? Fact::Global : Fact::FreshSafe;
  }

  std::vector<std::size_t> successors(std::size_t i) const {
    const ir::Instruction &in = fn_.body[i];
    switch (in.op) {
    case ir::Opcode::Br: return {fn_.label_index(in.target)};
    case ir::Opcode::Cbr: return {fn_.label_index(in.target), fn_.label_index(in.target_false)};
    case ir::Opcode::Ret: return {};
    default: return {i + 1};
    }
  }

  /// Meet \p from into \p into; returns whether \p into changed.
  static bool meet_into(FlowState &into, const FlowState &from) {
    if (!from.reached)
      return false;
    if (!into.reached) {
      into = from;
      return true;
    }
    FlowState merged = into;
    for (std::size_t r = 0; r < merged.regs.size(); ++r) {
      std::vector<OriginId> u;
      std::set_union(into.regs[r].begin(), into.regs[r].end(), from.regs[r].begin(), from.regs[r].end(),
                     std::back_inserter(u));
      merged.regs[r] = std::move(u);
    }
    for (const auto &[o, f] : from.flags) {
      auto [it, fresh] = merged.flags.emplace(o, f);
      if (!fresh) {
        it->second.safe = it->second.safe && f.safe;
        it->second.escaped = it->second.escaped || f.escaped;
      }
    }
    if (merged == into)
      return false;
    into = std::move(merged);
    return true;
  }

  /// After a passing check at instruction \p i, the value in \p r names one
  /// live object. With a single latest origin that origin becomes safe.
  /// Otherwise \p r gets a fresh safe origin for the checked object; the
  /// origins it may alias are marked escaped so a free through any of them
  /// also kills the new one.
  void make_checked(FlowState &st, std::uint32_t r, std::size_t i) const {
    const std::vector<OriginId> set = st.regs[r];
    if (set.empty())
      return;
    if (set.size() == 1 && is_latest(set[0])) {
      st.flags[set[0]].safe = true;
      return;
    }
    bool all_global = true;
    for (OriginId o : set) {
      OriginFlags &f = st.flags[o];
      if (!f.global) {
        f.escaped = true;
        all_global = false;
      }
    }
    if (!all_global)
      define(st, r, check_slot(i), {true, true, false});
  }

  std::uint32_t check_slot(std::size_t i) const {
    return static_cast<std::uint32_t>(fn_.body.size() + fn_.params.size() + i);
  }

  static void kill_escaped(FlowState &st) {
    for (auto &[o, f] : st.flags)
      if (f.escaped && !f.global)
        f.safe = false;
  }

  static void escape(FlowState &st, std::uint32_t r, bool unsafe) {
    for (OriginId o : st.regs[r]) {
      OriginFlags &f = st.flags[o];
      if (f.global)
        continue;
      f.escaped = true;
      if (unsafe)
        f.safe = false;
    }
  }

  static void kill_freed(FlowState &st, std::uint32_t r) {
    bool any_escaped = false;
    for (OriginId o : st.regs[r]) {
      OriginFlags &f = st.flags[o];
      if (f.global)
        continue;
      f.safe = false;
      any_escaped = any_escaped || f.escaped;
    }
    if (any_escaped)
      kill_escaped(st);
  }

  static void define(FlowState &st, std::uint32_t dst, std::uint32_t slot, OriginFlags flags) {
    OriginId cur = latest(slot);
    OriginId old = earlier(slot);
    if (auto it = st.flags.find(cur); it != st.flags.end()) {
      OriginFlags prev = it->second;
      st.flags.erase(it);
      auto [ot, fresh] = st.flags.emplace(old, prev);
      if (!fresh) {
        ot->second.safe = ot->second.safe && prev.safe;
        ot->second.escaped = ot->second.escaped || prev.escaped;
      }
      ot->second.safe = false;
      for (auto &set : st.regs) {
        auto pos = std::lower_bound(set.begin(), set.end(), cur);
        if (pos != set.end() && *pos == cur) {
          set.erase(pos);
          set.insert(std::lower_bound(set.begin(), set.end(), old), old);
          set.erase(std::unique(set.begin(), set.end()), set.end());
        }
      }
    }
    st.regs[dst] = {cur};
    st.flags[cur] = flags;
  }

  static void gc(FlowState &st) {
    std::set<OriginId> live;
    for (const auto &set : st.regs)
      live.insert(set.begin(), set.end());
    for (auto it = st.flags.begin(); it != st.flags.end();)
      it = live.contains(it->first) ? std::next(it) : st.flags.erase(it);
  }

  void transfer(std::size_t i, FlowState &st) const {
    using ir::Opcode;
    const ir::Instruction &in = fn_.body[i];
    const auto slot = static_cast<std::uint32_t>(i);
    auto reg_of = [&](std::size_t k) { return in.args[k].is_reg() ? in.args[k].reg : ir::kNoReg; };
    const OriginFlags opaque{false, true, false};

    switch (in.op) {
    case Opcode::Alloc:
      define(st, in.dst, slot, {true, false, false});
      break;
    case Opcode::Realloc:
      kill_freed(st, in.args[0].reg);
      define(st, in.dst, slot, {true, false, false});
      break;
    case Opcode::Free:
      if (auto r = reg_of(0); r != ir::kNoReg)
        kill_freed(st, r);
      break;
    case Opcode::Load:
      make_checked(st, in.args[0].reg, i);
      define(st, in.dst, slot, opaque);
      break;
    case Opcode::Store:
      make_checked(st, in.args[0].reg, i);
      if (auto v = reg_of(1); v != ir::kNoReg)
        escape(st, v, true);
      break;
    case Opcode::PtrAdd:
    case Opcode::Copy:
      st.regs[in.dst] = in.args[0].is_reg() ? st.regs[in.args[0].reg] : std::vector<OriginId>{};
      break;
    case Opcode::GlobAddr:
      define(st, in.dst, slot, {true, false, true});
      break;
    case Opcode::Call:
      for (std::size_t k = 0; k < in.args.size(); ++k)
        if (auto r = reg_of(k); r != ir::kNoReg)
          escape(st, r, true);
      kill_escaped(st);
      if (in.has_dst())
        define(st, in.dst, slot, opaque);
      break;
    case Opcode::ExtCall: {
      const ir::ExternalSig *sig = ir::find_external(in.symbol);
      bool listed = whitelist_.contains(in.symbol);
      for (std::size_t k = 0; k < in.args.size(); ++k) {
        auto r = reg_of(k);
        if (r == ir::kNoReg)
          continue;
        bool ptr = sig && (sig->pointer_args & (1u << k));
        if (ptr)
          make_checked(st, r, i);
        if (!listed)
          escape(st, r, true);
        else if (ptr && sig->returns_pointer && in.has_dst())
          escape(st, r, false); // the result may alias this argument
      }
      if (!listed)
        kill_escaped(st);
      if (in.has_dst())
        define(st, in.dst, slot, opaque);
      break;
    }
    case Opcode::Const:
    case Opcode::Cmp:
    case Opcode::Add:
    case Opcode::Sub:
      st.regs[in.dst].clear();
      break;
    case Opcode::Br:
    case Opcode::Cbr:
    case Opcode::Ret:
    case Opcode::Check:
      break;
    }
    gc(st);
  }

  const ir::Function &fn_;
  const std::set<std::string, std::less<>> &whitelist_;
};

} // namespace detail

inline SafeWindowFacts safe_window_analysis(const ir::Function &fn,
                                            const std::set<std::string, std::less<>> &whitelist) {
  return detail::SafeWindow(fn, whitelist).run();
}

// Instrumentation ---------------------------------------------------------------

class InstrumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline InstrumentResult instrument(const ir::Program &program, const InstrumentOptions &opts = {}) {
  InstrumentResult res;
  res.program.globals = program.globals;
  res.program.entry = program.entry;
  for (const ir::Function &fn : program.functions) {
    SafeWindowFacts facts;
    if (opts.optimize)
      facts = safe_window_analysis(fn, opts.whitelist);

    ir::Function out;
    out.name = fn.name;
    out.reg_names = fn.reg_names;
    out.params = fn.params;
    std::vector<std::size_t> new_pos(fn.body.size() + 1);

    for (std::size_t i = 0; i < fn.body.size(); ++i) {
      const ir::Instruction &in = fn.body[i];
      if (in.op == ir::Opcode::Check)
        throw InstrumentError("function '" + fn.name + "' already contains check instructions");
      new_pos[i] = out.body.size();
      std::size_t origin = in.origin == ir::kNoIndex ? i : in.origin;

      auto site = [&](SiteKind kind, std::uint32_t reg) {
        CheckSite s{fn.name, origin, kind, fn.reg_names.at(reg), false, ElisionReason::None};
        if (kind != SiteKind::Free && opts.optimize) {
          Fact f = facts.at(i, reg);
          if (f != Fact::Unknown) {
            s.elided = true;
            s.reason = f == Fact::Global ? ElisionReason::Global : ElisionReason::SafeWindow;
          }
        }
        if (kind != SiteKind::Free && !s.elided) {
          ir::Instruction chk;
          chk.op = ir::Opcode::Check;
          chk.args = {ir::Operand::of_reg(reg)};
          chk.origin = origin;
          chk.line = in.line;
          out.body.push_back(std::move(chk));
        }
        res.sites.push_back(std::move(s));
      };

      switch (in.op) {
      case ir::Opcode::Load:
        site(SiteKind::Load, in.args[0].reg);
        break;
      case ir::Opcode::Store:
        site(SiteKind::Store, in.args[0].reg);
        break;
      case ir::Opcode::ExtCall:
        if (const ir::ExternalSig *sig = ir::find_external(in.symbol))
          for (std::size_t k = 0; k < in.args.size(); ++k)
            if ((sig->pointer_args & (1u << k)) && in.args[k].is_reg())
              site(SiteKind::ExtBoundary, in.args[k].reg);
        break;
      case ir::Opcode::Free:
      case ir::Opcode::Realloc:
        if (in.args[0].is_reg())
          site(SiteKind::Free, in.args[0].reg);
        break;
      default:
        break;
      }
      ir::Instruction copy = in;
      copy.origin = origin;
      out.body.push_back(std::move(copy));
    }
    new_pos[fn.body.size()] = out.body.size();
    for (const auto &[label, idx] : fn.labels)
      out.labels[label] = new_pos[idx];
    res.program.functions.push_back(std::move(out));
  }
  return res;
}

// Equivalence audit -------------------------------------------------------------

struct AuditConfig {
  RunOptions run;
  InstrumentOptions instrument;
  /// Also re-check elided sites silently during the optimized run.
  bool shadow_check = true;
};

struct AuditReport {
  bool equivalent = true;
  Verdict optimized;
  Verdict unoptimized;
  std::uint64_t checks_optimized = 0;
  std::uint64_t checks_unoptimized = 0;
  std::size_t sites_elided = 0;
  /// Dynamic executions of elided sites in the optimized run; needs
  /// shadow_check. Zero when the run stops before reaching any of them.
  std::uint64_t elided_sites_reached = 0;
  std::string divergence;
};

/// Runs the optimized and unoptimized instrumentation of \p program and
/// compares verdicts by kind, violation class and dynamic event. The
/// optimized run's executed checks must be a subset of the unoptimized run's.
inline AuditReport verdict_equivalence_audit(const ir::Program &program, const AuditConfig &cfg = {}) {
  AuditReport rep;
  InstrumentOptions on = cfg.instrument;
  on.optimize = true;
  InstrumentOptions off = cfg.instrument;
  off.optimize = false;
  InstrumentResult opt = instrument(program, on);
  InstrumentResult unopt = instrument(program, off);
  rep.sites_elided = opt.elided();

  RunOptions ro = cfg.run;
  ro.mode = ExecMode::Checked;
  ro.record_checks = true;
  RunReport ru = interpret(unopt.program, ro);
  if (cfg.shadow_check)
    ro.shadow_sites = opt.elided_keys();
  RunReport rp = interpret(opt.program, ro);

  rep.optimized = rp.verdict;
  rep.unoptimized = ru.verdict;
  rep.checks_optimized = rp.checks_executed;
  rep.checks_unoptimized = ru.checks_executed;
  rep.elided_sites_reached = rp.shadow_probes;

  std::ostringstream why;
  const Verdict &a = rp.verdict;
  const Verdict &b = ru.verdict;
  if (a.kind != b.kind || a.violation != b.violation || a.event != b.event) {
    why << "verdict mismatch: optimized " << to_string(a.kind) << '/' << to_string(a.violation)
        << " at event " << a.event << " (" << a.function << ':' << a.origin << ") vs unoptimized "
        << to_string(b.kind) << '/' << to_string(b.violation) << " at event " << b.event << " ("
        << b.function << ':' << b.origin << ")";
    if (!a.detail.empty())
      why << "; " << a.detail;
  } else if (a.function != b.function || a.origin != b.origin) {
    why << "verdict site mismatch: " << a.function << ':' << a.origin << " vs " << b.function << ':'
        << b.origin;
  } else if (std::sort(ru.check_log.begin(), ru.check_log.end()),
             std::sort(rp.check_log.begin(), rp.check_log.end()),
             !std::includes(ru.check_log.begin(), ru.check_log.end(), rp.check_log.begin(),
                            rp.check_log.end())) {
    why << "optimized run executed a check the unoptimized run did not";
  } else if (rp.output != ru.output) {
    why << "program output differs";
  } else if (cfg.shadow_check && rep.elided_sites_reached > 0 &&
             rep.checks_optimized >= rep.checks_unoptimized) {
    why << "elided sites ran but the optimized run executed no fewer checks";
  }
  rep.divergence = why.str();
  rep.equivalent = rep.divergence.empty();
  return rep;
}

} // namespace ptauth

#endif // PTAUTH_INSTRUMENTER_HPP
