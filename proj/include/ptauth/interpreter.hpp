//===- interpreter.hpp - Mini IR interpreter --------------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Executes a mini IR program either raw (plain allocator, no checks) or
/// checked (allocation, free, realloc and CHECK routed through the
/// points-to authentication runtime; pointer arguments to externals are
/// stripped and pointer results re-signed).
///
/// Independently of the mode, the interpreter keeps a ground-truth oracle:
/// every pointer value carries the serial number of the allocation it was
/// derived from, and accesses, frees and external hand-offs through a dead
/// allocation are logged. The oracle never feeds a detection decision.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_INTERPRETER_HPP
#define PTAUTH_INTERPRETER_HPP

#include "ptauth/ir.hpp"
#include "ptauth/runtime.hpp"
#include "ptauth/sim_memory.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <span>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ptauth {

enum class ExecMode : std::uint8_t { Raw, Checked };

inline std::string_view to_string(ExecMode m) { return m == ExecMode::Raw ? "raw" : "checked"; }

enum class VerdictKind : std::uint8_t {
  Clean,
  Violation,
  Timeout,
  TypeFault,
  OutOfMemory,
  RuntimeError,
  /// Audit only: an elided site would have failed its check.
  ElisionUnsound,
};

inline std::string_view to_string(VerdictKind k) {
  switch (k) {
  case VerdictKind::Clean: return "clean";
  case VerdictKind::Violation: return "violation";
  case VerdictKind::Timeout: return "timeout";
  case VerdictKind::TypeFault: return "type_fault";
  case VerdictKind::OutOfMemory: return "out_of_memory";
  case VerdictKind::RuntimeError: return "runtime_error";
  case VerdictKind::ElisionUnsound: return "elision_unsound";
  }
  return "?";
}

struct Verdict {
  VerdictKind kind = VerdictKind::Clean;
  CheckOutcome violation = CheckOutcome::OkAt;
  std::string function;
  std::size_t index = ir::kNoIndex;  ///< index in the executed body
  std::size_t origin = ir::kNoIndex; ///< index in the source body
  std::uint64_t event = 0;           ///< program instructions retired before it
  std::string detail;

  bool clean() const { return kind == VerdictKind::Clean; }
  bool is_violation() const { return kind == VerdictKind::Violation; }
};

/// Ground-truth temporal event, seen by the oracle.
struct OracleEvent {
  CheckOutcome kind; // UseAfterFree, DoubleFree or InvalidFree
  std::string function;
  std::size_t origin = ir::kNoIndex;
  std::uint64_t event = 0;
  std::uint64_t address = 0;
};

struct CheckRecord {
  std::string function;
  std::size_t origin;
  std::uint64_t event;
  friend auto operator<=>(const CheckRecord &, const CheckRecord &) = default;
};

struct RunReport {
  ExecMode mode = ExecMode::Raw;
  Verdict verdict;
  std::uint64_t instructions_retired = 0; ///< program instructions; CHECK excluded
  std::uint64_t checks_executed = 0;      ///< CHECK instructions that ran
  std::uint64_t backward_steps = 0;
  std::uint64_t runtime_cost_units = 0;
  std::uint64_t backward_cost_units = 0;
  std::uint64_t check_cost_units = 0;
  std::uint64_t frees = 0;
  std::uint64_t free_backward_steps = 0;
  std::uint64_t cost_units = 0; ///< instructions_retired + runtime_cost_units
  std::map<std::uint64_t, std::uint64_t> step_histogram;
  std::uint64_t peak_bytes = 0;
  double mean_bytes = 0.0;
  std::uint64_t final_bytes = 0;
  std::vector<std::uint64_t> heap_shape; ///< sorted requested sizes of live chunks
  std::vector<OracleEvent> oracle;
  std::vector<std::uint64_t> wild_writes;
  std::uint64_t cross_chunk_writes = 0;
  std::uint64_t shadow_probes = 0; ///< executions of RunOptions::shadow_sites
  std::string output;
  std::optional<std::int64_t> return_value;
  std::vector<CheckRecord> check_log; ///< filled when RunOptions::record_checks
  std::vector<HeapEvent> heap_events; ///< filled when RunOptions::record_heap_events
};

struct SiteKey {
  std::string function;
  std::size_t origin;
  friend auto operator<=>(const SiteKey &, const SiteKey &) = default;
};

struct RunOptions {
  ExecMode mode = ExecMode::Checked;
  RuntimeConfig runtime;
  std::uint64_t fuel = 100'000'000;
  std::size_t max_call_depth = 4096;
  bool record_checks = false;
  bool record_heap_events = false;
  /// Sites whose check was elided; each is re-checked silently before the
  /// guarded instruction runs and a failure ends the run as ElisionUnsound.
  std::set<SiteKey> shadow_sites;
  std::uint64_t heap_capacity = std::uint64_t{1} << 32;
};

namespace detail {

struct Value {
  enum class Kind : std::uint8_t { Unset, Int, Ptr };
  Kind kind = Kind::Unset;
  std::uint64_t bits = 0;
  std::uint64_t prov = 0; ///< allocation serial; 0 for statics

  static Value integer(std::uint64_t v) { return {Kind::Int, v, 0}; }
  static Value pointer(std::uint64_t bits, std::uint64_t prov) { return {Kind::Ptr, bits, prov}; }
  bool is_ptr() const { return kind == Kind::Ptr; }
  bool is_int() const { return kind == Kind::Int; }
};

struct Halt {
  Verdict verdict;
};

class Machine {
public:
  Machine(const ir::Program &prog, const RunOptions &opts)
      : prog_(prog), opts_(opts),
        heap_(HeapConfig{opts.mode == ExecMode::Checked, opts.heap_capacity, opts.record_heap_events}) {
    if (checked())
      rt_.emplace(heap_, opts.runtime);
    for (const auto &g : prog.globals)
      globals_[g.name] = heap_.map_static(g.size);
  }

  RunReport run() {
    report_.mode = opts_.mode;
    try {
      const ir::Function *entry = prog_.find(prog_.entry);
      if (!entry)
        halt(VerdictKind::RuntimeError, "no entry function '" + prog_.entry + "'");
      if (!entry->params.empty())
        halt(VerdictKind::RuntimeError, "entry function takes parameters");
      push(*entry, {}, ir::kNoReg);
      loop();
    } catch (Halt &h) {
      report_.verdict = std::move(h.verdict);
    }
    finish();
    return std::move(report_);
  }

private:
  struct Frame {
    const ir::Function *fn;
    std::vector<Value> regs;
    std::size_t pc = 0;
    std::uint32_t ret_dst = ir::kNoReg;
  };

  struct Allocation {
    RawAddress base;
    bool live = true;
  };

  bool checked() const { return opts_.mode == ExecMode::Checked; }

  [[noreturn]] void halt(VerdictKind k, std::string detail = {},
                         CheckOutcome outcome = CheckOutcome::OkAt) {
    Verdict v;
    v.kind = k;
    v.violation = outcome;
    v.detail = std::move(detail);
    if (!frames_.empty()) {
      const Frame &f = frames_.back();
      v.function = f.fn->name;
      std::size_t idx = f.pc;
      // A failed CHECK reports the instruction it guards.
      while (idx < f.fn->body.size() && f.fn->body[idx].op == ir::Opcode::Check)
        ++idx;
      if (idx >= f.fn->body.size())
        idx = f.pc;
      v.index = idx;
      v.origin = idx < f.fn->body.size() ? f.fn->body[idx].origin : ir::kNoIndex;
    }
    v.event = report_.instructions_retired;
    throw Halt{std::move(v)};
  }

  void push(const ir::Function &fn, std::vector<Value> args, std::uint32_t ret_dst) {
    if (frames_.size() >= opts_.max_call_depth)
      halt(VerdictKind::RuntimeError, "call depth limit exceeded");
    Frame f{&fn, std::vector<Value>(fn.num_regs()), 0, ret_dst};
    for (std::size_t i = 0; i < fn.params.size(); ++i)
      f.regs[fn.params[i]] = args[i];
    frames_.push_back(std::move(f));
  }

  Value read(const ir::Operand &o) {
    if (!o.is_reg())
      return Value::integer(static_cast<std::uint64_t>(o.imm));
    const Frame &f = frames_.back();
    const Value &v = f.regs[o.reg];
    if (v.kind == Value::Kind::Unset)
      halt(VerdictKind::RuntimeError, "read of unassigned register '" + f.fn->reg_names[o.reg] + "'");
    return v;
  }

  void write(std::uint32_t reg, Value v) {
    if (reg != ir::kNoReg)
      frames_.back().regs[reg] = v;
  }

  Value pointer_operand(const ir::Operand &o) {
    Value v = read(o);
    if (!v.is_ptr())
      halt(VerdictKind::TypeFault, "integer used as a pointer");
    return v;
  }

  std::uint64_t int_operand(const ir::Operand &o) {
    Value v = read(o);
    if (!v.is_int())
      halt(VerdictKind::TypeFault, "pointer used as an integer");
    return v.bits;
  }

  static RawAddress address_of(const Value &v) { return RawAddress(v.bits & kAddressMask); }

  Runtime &rt() { return *rt_; }

  // Oracle ---------------------------------------------------------------

  void oracle(CheckOutcome kind, std::uint64_t addr) {
    const Frame &f = frames_.back();
    report_.oracle.push_back(
        {kind, f.fn->name, f.fn->body[f.pc].origin, report_.instructions_retired, addr});
  }

  bool dead(const Value &v) const {
    if (v.prov == 0)
      return false;
    return !allocs_.at(v.prov).live;
  }

  void oracle_access(const Value &v) {
    if (dead(v))
      oracle(CheckOutcome::UseAfterFree, address_of(v).value);
  }

  void oracle_free(const Value &v) {
    RawAddress a = address_of(v);
    if (v.prov == 0) {
      oracle(CheckOutcome::InvalidFree, a.value);
      return;
    }
    const Allocation &rec = allocs_.at(v.prov);
    if (a != rec.base)
      oracle(CheckOutcome::InvalidFree, a.value);
    else if (!rec.live)
      oracle(CheckOutcome::DoubleFree, a.value);
  }

  std::uint64_t new_allocation(RawAddress base) {
    std::uint64_t serial = ++serials_;
    allocs_.emplace(serial, Allocation{base, true});
    live_at_[base.value] = serial;
    return serial;
  }

  void allocation_released(RawAddress base) {
    auto it = live_at_.find(base.value);
    if (it == live_at_.end())
      return;
    allocs_.at(it->second).live = false;
    live_at_.erase(it);
  }

  std::uint64_t prov_at(RawAddress base) const {
    auto it = live_at_.find(base.value);
    return it == live_at_.end() ? 0 : it->second;
  }

  // Memory with pointer shadow ----------------------------------------------

  void clobber_shadow(std::uint64_t addr, std::uint64_t n) {
    auto lo = shadow_.lower_bound(addr >= 7 ? addr - 7 : 0);
    while (lo != shadow_.end() && lo->first < addr + n)
      lo = shadow_.erase(lo);
  }

  void store_value(RawAddress addr, const Value &v, std::uint8_t width) {
    std::array<std::uint8_t, 8> buf{};
    std::memcpy(buf.data(), &v.bits, 8);
    auto r = heap_.write(addr, std::span<const std::uint8_t>(buf.data(), width));
    if (r.wild)
      report_.wild_writes.push_back(addr.value);
    clobber_shadow(addr.value, width);
    if (v.is_ptr() && width == 8 && !r.wild)
      shadow_[addr.value] = {v.prov};
  }

  Value load_value(RawAddress addr, std::uint8_t width) {
    std::array<std::uint8_t, 8> buf{};
    heap_.read(addr, std::span<std::uint8_t>(buf.data(), width));
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf.data(), 8);
    if (width == 8)
      if (auto it = shadow_.find(addr.value); it != shadow_.end())
        return Value::pointer(bits, it->second.prov);
    return Value::integer(bits);
  }

  // Execution ----------------------------------------------------------------

  void shadow_check(const ir::Instruction &in, const Value &ptr) {
    if (!checked() || opts_.shadow_sites.empty() || !ptr.is_ptr())
      return;
    if (!opts_.shadow_sites.contains(SiteKey{frames_.back().fn->name, in.origin}))
      return;
    ++report_.shadow_probes;
    CheckResult r = rt().probe(SignedPointer(ptr.bits));
    if (!r.ok())
      halt(VerdictKind::ElisionUnsound, "elided check would report " + std::string(to_string(r.outcome)),
           r.outcome);
  }

  void loop() {
    while (!frames_.empty()) {
      Frame &f = frames_.back();
      if (f.pc >= f.fn->body.size()) {
        do_return(Value());
        continue;
      }
      if (fuel_used_++ >= opts_.fuel)
        halt(VerdictKind::Timeout, "instruction budget exhausted");
      const ir::Instruction &in = f.fn->body[f.pc];
      if (in.op == ir::Opcode::Check) {
        exec_check(in);
        ++frames_.back().pc;
        continue;
      }
      bool advance = step(in);
      ++report_.instructions_retired;
      if (opts_.runtime.sample_interval &&
          report_.instructions_retired % opts_.runtime.sample_interval == 0)
        heap_.sample();
      if (advance)
        ++frames_.back().pc;
    }
  }

  void exec_check(const ir::Instruction &in) {
    if (!checked())
      return;
    const Value &v = frames_.back().regs[in.args.at(0).reg];
    if (!v.is_ptr())
      return; // the guarded instruction reports the type error
    ++report_.checks_executed;
    if (opts_.record_checks)
      report_.check_log.push_back({frames_.back().fn->name, in.origin, report_.instructions_retired});
    CheckResult r = rt().check(SignedPointer(v.bits));
    if (!r.ok())
      halt(VerdictKind::Violation, "", r.outcome);
  }

  void do_return(Value v) {
    std::uint32_t dst = frames_.back().ret_dst;
    frames_.pop_back();
    if (frames_.empty()) {
      if (v.is_int())
        report_.return_value = static_cast<std::int64_t>(v.bits);
      return;
    }
    if (dst != ir::kNoReg)
      write(dst, v.kind == Value::Kind::Unset ? Value::integer(0) : v);
    ++frames_.back().pc;
  }

  void jump(const std::string &label) { frames_.back().pc = frames_.back().fn->label_index(label); }

  /// Returns false when the instruction already moved the pc.
  bool step(const ir::Instruction &in) {
    using ir::Opcode;
    switch (in.op) {
    case Opcode::Alloc: exec_alloc(in); return true;
    case Opcode::Free: exec_free(in); return true;
    case Opcode::Realloc: exec_realloc(in); return true;
    case Opcode::Load: {
      Value p = pointer_operand(in.args[0]);
      shadow_check(in, p);
      oracle_access(p);
      RawAddress a(address_of(p).value + static_cast<std::uint64_t>(in.offset));
      write(in.dst, load_value(a, in.width));
      return true;
    }
    case Opcode::Store: {
      Value p = pointer_operand(in.args[0]);
      Value v = read(in.args[1]);
      shadow_check(in, p);
      oracle_access(p);
      RawAddress a(address_of(p).value + static_cast<std::uint64_t>(in.offset));
      store_value(a, v, in.width);
      return true;
    }
    case Opcode::PtrAdd: {
      Value p = pointer_operand(in.args[0]);
      std::uint64_t d = int_operand(in.args[1]);
      std::uint64_t moved = ((p.bits & kAddressMask) + d) & kAddressMask;
      write(in.dst, Value::pointer((p.bits & ~kAddressMask) | moved, p.prov));
      return true;
    }
    case Opcode::Copy: write(in.dst, read(in.args[0])); return true;
    case Opcode::GlobAddr:
      write(in.dst, Value::pointer(globals_.at(in.symbol).value, 0));
      return true;
    case Opcode::Call: {
      std::vector<Value> args;
      args.reserve(in.args.size());
      for (const auto &a : in.args)
        args.push_back(read(a));
      push(*prog_.find(in.symbol), std::move(args), in.dst);
      return false;
    }
    case Opcode::ExtCall: exec_external(in); return true;
    case Opcode::Const: write(in.dst, Value::integer(static_cast<std::uint64_t>(in.args[0].imm))); return true;
    case Opcode::Br: jump(in.target); return false;
    case Opcode::Cbr: {
      Value c = read(in.args[0]);
      jump(c.bits != 0 ? in.target : in.target_false);
      return false;
    }
    case Opcode::Cmp: {
      Value a = read(in.args[0]);
      Value b = read(in.args[1]);
      write(in.dst, Value::integer(compare(in.pred, a, b) ? 1 : 0));
      return true;
    }
    case Opcode::Add:
    case Opcode::Sub: {
      std::uint64_t a = int_operand(in.args[0]);
      std::uint64_t b = int_operand(in.args[1]);
      write(in.dst, Value::integer(in.op == Opcode::Add ? a + b : a - b));
      return true;
    }
    case Opcode::Ret: {
      Value v = in.args.empty() ? Value() : read(in.args[0]);
      do_return(v);
      return false;
    }
    case Opcode::Check: return true;
    }
    return true;
  }

  static bool compare(ir::CmpPred p, const Value &a, const Value &b) {
    bool ptrs = a.is_ptr() || b.is_ptr();
    std::uint64_t x = ptrs ? a.bits & kAddressMask : a.bits;
    std::uint64_t y = ptrs ? b.bits & kAddressMask : b.bits;
    auto sx = static_cast<std::int64_t>(x);
    auto sy = static_cast<std::int64_t>(y);
    switch (p) {
    case ir::CmpPred::Eq: return ptrs ? a.bits == b.bits : x == y;
    case ir::CmpPred::Ne: return ptrs ? a.bits != b.bits : x != y;
    case ir::CmpPred::Lt: return sx < sy;
    case ir::CmpPred::Le: return sx <= sy;
    case ir::CmpPred::Gt: return sx > sy;
    case ir::CmpPred::Ge: return sx >= sy;
    }
    return false;
  }

  void exec_alloc(const ir::Instruction &in) {
    std::uint64_t size = int_operand(in.args[0]);
    try {
      if (checked()) {
        SignedPointer sp = rt().malloc(size);
        write(in.dst, Value::pointer(sp.bits, new_allocation(pac_strip(sp))));
      } else {
        RawAddress base = heap_.alloc(size);
        write(in.dst, Value::pointer(base.value, new_allocation(base)));
      }
    } catch (const AllocFailure &e) {
      halt(VerdictKind::OutOfMemory, e.what());
    }
  }

  void exec_free(const ir::Instruction &in) {
    Value p = read(in.args[0]);
    if (p.is_int() && p.bits == 0)
      return; // free(NULL)
    if (!p.is_ptr())
      halt(VerdictKind::TypeFault, "free of a non-pointer");
    oracle_free(p);
    RawAddress a = address_of(p);
    if (checked()) {
      CheckResult r = rt().free(SignedPointer(p.bits));
      if (!r.ok())
        halt(VerdictKind::Violation, "", r.outcome);
      allocation_released(a);
    } else if (heap_.free(a) == FreeStatus::Ok) {
      allocation_released(a);
    }
  }

  void exec_realloc(const ir::Instruction &in) {
    Value p = pointer_operand(in.args[0]);
    std::uint64_t size = int_operand(in.args[1]);
    oracle_free(p);
    RawAddress a = address_of(p);
    try {
      if (checked()) {
        auto r = rt().realloc(SignedPointer(p.bits), size);
        if (!r.auth.ok())
          halt(VerdictKind::Violation, "", r.auth.outcome);
        allocation_released(a);
        write(in.dst, Value::pointer(r.pointer.bits, new_allocation(pac_strip(r.pointer))));
        return;
      }
      auto r = heap_.realloc(a, size);
      if (!r) {
        // Raw realloc of a non-chunk is undefined; model it as a fresh block.
        RawAddress nb = heap_.alloc(size);
        write(in.dst, Value::pointer(nb.value, new_allocation(nb)));
        return;
      }
      allocation_released(a);
      write(in.dst, Value::pointer(r->base.value, new_allocation(r->base)));
    } catch (const AllocFailure &e) {
      halt(VerdictKind::OutOfMemory, e.what());
    }
  }

  RawAddress hand_off(const ir::Instruction &in, const Value &v) {
    shadow_check(in, v);
    if (checked())
      return rt().strip_for_external(SignedPointer(v.bits));
    return address_of(v);
  }

  std::string read_cstring(RawAddress a, std::size_t limit = 4096) {
    std::string s;
    for (std::size_t i = 0; i < limit; ++i) {
      std::uint8_t c = 0;
      if (!heap_.read(RawAddress(a.value + i), std::span<std::uint8_t>(&c, 1)) || c == 0)
        break;
      s.push_back(static_cast<char>(c));
    }
    return s;
  }

  void copy_bytes(RawAddress dst, RawAddress src, std::uint64_t n) {
    std::vector<std::uint8_t> buf(n);
    heap_.read(src, buf);
    auto r = heap_.write(dst, buf);
    if (r.wild)
      report_.wild_writes.push_back(dst.value);
    std::vector<std::pair<std::uint64_t, ShadowEntry>> moved;
    for (auto it = shadow_.lower_bound(src.value); it != shadow_.end() && it->first + 8 <= src.value + n; ++it)
      moved.emplace_back(it->first - src.value + dst.value, it->second);
    clobber_shadow(dst.value, n);
    for (auto &[addr, e] : moved)
      shadow_[addr] = e;
  }

  void exec_external(const ir::Instruction &in) {
    const ir::ExternalSig &sig = *ir::find_external(in.symbol);
    std::vector<Value> args;
    std::vector<RawAddress> raw(in.args.size());
    for (std::size_t i = 0; i < in.args.size(); ++i) {
      args.push_back(read(in.args[i]));
      if (sig.pointer_args & (1u << i)) {
        if (!args[i].is_ptr())
          halt(VerdictKind::TypeFault, "external '" + in.symbol + "' expects a pointer");
        if (sig.never_frees || in.symbol == "opaque_keep")
          oracle_access(args[i]);
        raw[i] = hand_off(in, args[i]);
      }
    }
    std::optional<RawAddress> result;
    // Builtins that return one of their arguments hand back the caller's own
    // signed copy; re-signing would reject interior destinations.
    std::optional<std::size_t> returns_arg;
    if (in.symbol == "print_str") {
      report_.output += read_cstring(raw[0]);
      report_.output += '\n';
    } else if (in.symbol == "mem_copy") {
      std::uint64_t n = int_operand(in.args[2]);
      copy_bytes(raw[0], raw[1], n);
      result = raw[0];
      returns_arg = 0;
    } else if (in.symbol == "str_copy") {
      std::string s = read_cstring(raw[1]);
      copy_bytes(raw[0], raw[1], s.size() + 1);
      result = raw[0];
      returns_arg = 0;
    } else if (in.symbol == "opaque_free") {
      oracle_free(args[0]);
      if (heap_.free(raw[0]) == FreeStatus::Ok)
        allocation_released(raw[0]);
    } else if (in.symbol == "opaque_keep") {
      kept_.push_back(raw[0]);
    }
    if (!in.has_dst())
      return;
    if (!result) {
      write(in.dst, Value::integer(0));
      return;
    }
    if (returns_arg) {
      write(in.dst, args[*returns_arg]);
      return;
    }
    if (!checked()) {
      write(in.dst, Value::pointer(result->value, prov_at(*result)));
      return;
    }
    auto sp = rt().resign_external(*result);
    if (!sp)
      halt(VerdictKind::Violation, "re-sign of a non-base pointer from '" + in.symbol + "'",
           CheckOutcome::WildPointer);
    write(in.dst, Value::pointer(sp->bits, prov_at(*result)));
  }

  void finish() {
    if (heap_.usage_stats().current || report_.instructions_retired)
      heap_.sample();
    UsageStats u = heap_.usage_stats();
    report_.peak_bytes = u.peak;
    report_.mean_bytes = u.mean_sampled;
    report_.final_bytes = u.current;
    for (const auto &c : heap_.live_chunks())
      report_.heap_shape.push_back(c.requested_size);
    std::sort(report_.heap_shape.begin(), report_.heap_shape.end());
    report_.cross_chunk_writes = heap_.cross_chunk_writes();
    if (rt_) {
      const RuntimeCounters &c = rt_->counters();
      report_.backward_steps = c.backward_steps;
      report_.runtime_cost_units = c.cost_units;
      report_.backward_cost_units = c.backward_cost_units;
      report_.check_cost_units = c.check_cost_units;
      report_.frees = c.frees;
      report_.free_backward_steps = c.free_backward_steps;
      report_.step_histogram = c.step_histogram;
    }
    report_.cost_units = report_.instructions_retired + report_.runtime_cost_units;
    if (opts_.record_heap_events)
      report_.heap_events = heap_.events();
  }

  struct ShadowEntry {
    std::uint64_t prov;
  };

  const ir::Program &prog_;
  const RunOptions &opts_;
  Heap heap_;
  std::optional<Runtime> rt_;
  std::map<std::string, RawAddress> globals_;
  std::vector<Frame> frames_;
  std::unordered_map<std::uint64_t, Allocation> allocs_;
  std::unordered_map<std::uint64_t, std::uint64_t> live_at_; // base -> serial
  std::map<std::uint64_t, ShadowEntry> shadow_;               // address -> stored pointer
  std::vector<RawAddress> kept_;
  std::uint64_t serials_ = 0;
  std::uint64_t fuel_used_ = 0;
  RunReport report_;
};

} // namespace detail

/// Runs \p program from its entry function. In checked mode the program is
/// expected to have been through the instrumenter already.
inline RunReport interpret(const ir::Program &program, const RunOptions &opts) {
  return detail::Machine(program, opts).run();
}

} // namespace ptauth

#endif // PTAUTH_INTERPRETER_HPP
