//===- ir.hpp - Pointer-centric mini IR -------------------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// A small register IR for heap-pointer programs. Functions are flat
/// instruction lists; labels name positions in the list and are not
/// instructions themselves. Registers are per-function and named.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_IR_HPP
#define PTAUTH_IR_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ptauth::ir {

enum class Opcode : std::uint8_t {
  Alloc,
  Free,
  Realloc,
  Load,
  Store,
  PtrAdd,
  Copy,
  GlobAddr,
  Call,
  ExtCall,
  Const,
  Br,
  Cbr,
  Cmp,
  Add,
  Sub,
  Ret,
  Check,
};

enum class CmpPred : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

inline constexpr std::uint32_t kNoReg = ~std::uint32_t{0};
inline constexpr std::size_t kNoIndex = ~std::size_t{0};

struct Operand {
  enum class Kind : std::uint8_t { Reg, Imm };
  Kind kind = Kind::Imm;
  std::uint32_t reg = kNoReg;
  std::int64_t imm = 0;

  static Operand of_reg(std::uint32_t r) { return {Kind::Reg, r, 0}; }
  static Operand of_imm(std::int64_t v) { return {Kind::Imm, kNoReg, v}; }
  bool is_reg() const { return kind == Kind::Reg; }
  friend bool operator==(const Operand &, const Operand &) = default;
};

/// Operand layout per opcode:
///   Alloc    dst = alloc a0                  a0: size
///   Free     free a0                         a0: reg
///   Realloc  dst = realloc a0, a1            a0: reg, a1: size
///   Load     dst = load.W [a0 + offset]
///   Store    store.W [a0 + offset], a1
///   PtrAdd   dst = ptradd a0, a1
///   Copy     dst = copy a0
///   GlobAddr dst = globaddr symbol
///   Call     [dst =] call symbol(args...)
///   ExtCall  [dst =] extcall symbol(args...)
///   Const    dst = const imm(a0)
///   Br       br target
///   Cbr      cbr a0, target, target_false
///   Cmp      dst = cmp pred a0, a1
///   Add/Sub  dst = add a0, a1
///   Ret      ret [a0]
///   Check    check a0
struct Instruction {
  Opcode op = Opcode::Ret;
  std::uint32_t dst = kNoReg;
  std::vector<Operand> args;
  std::string symbol;
  std::string target;
  std::string target_false;
  std::int64_t offset = 0;
  std::uint8_t width = 8;
  CmpPred pred = CmpPred::Eq;
  /// Index of the source instruction this one came from. CHECKs carry the
  /// index of the instruction they guard.
  std::size_t origin = kNoIndex;
  int line = 0;

  bool has_dst() const { return dst != kNoReg; }
};

struct Function {
  std::string name;
  std::vector<std::string> reg_names;
  std::vector<std::uint32_t> params;
  std::vector<Instruction> body;
  /// label -> index of the instruction it precedes (== body.size() at end)
  std::map<std::string, std::size_t> labels;

  std::size_t num_regs() const { return reg_names.size(); }

  std::size_t label_index(const std::string &label) const { return labels.at(label); }

  std::uint32_t reg(std::string_view name) const {
    for (std::uint32_t i = 0; i < reg_names.size(); ++i)
      if (reg_names[i] == name)
        return i;
    return kNoReg;
  }
};

struct Global {
  std::string name;
  std::uint64_t size = 0;
  friend bool operator==(const Global &, const Global &) = default;
};

struct Program {
  std::vector<Global> globals;
  std::vector<Function> functions;
  std::string entry = "main";

  const Function *find(std::string_view name) const {
    for (const auto &f : functions)
      if (f.name == name)
        return &f;
    return nullptr;
  }
  Function *find(std::string_view name) {
    for (auto &f : functions)
      if (f.name == name)
        return &f;
    return nullptr;
  }
};

/// Built-in external functions reachable through EXTCALL.
struct ExternalSig {
  std::string_view name;
  std::size_t arity;
  std::uint32_t pointer_args; ///< bitmask over argument positions
  bool returns_pointer;
  bool never_frees; ///< may stay inside a safe window
};

inline constexpr ExternalSig kExternals[] = {
    {"print_str", 1, 0b1, false, true},
    {"mem_copy", 3, 0b011, true, true},
    {"str_copy", 2, 0b11, true, true},
    {"opaque_free", 1, 0b1, false, false},
    {"opaque_keep", 1, 0b1, false, false},
};

inline const ExternalSig *find_external(std::string_view name) {
  for (const auto &e : kExternals)
    if (e.name == name)
      return &e;
  return nullptr;
}

inline std::string_view mnemonic(Opcode op) {
  switch (op) {
  case Opcode::Alloc: return "alloc";
  case Opcode::Free: return "free";
  case Opcode::Realloc: return "realloc";
  case Opcode::Load: return "load";
  case Opcode::Store: return "store";
  case Opcode::PtrAdd: return "ptradd";
  case Opcode::Copy: return "copy";
  case Opcode::GlobAddr: return "globaddr";
  case Opcode::Call: return "call";
  case Opcode::ExtCall: return "extcall";
  case Opcode::Const: return "const";
  case Opcode::Br: return "br";
  case Opcode::Cbr: return "cbr";
  case Opcode::Cmp: return "cmp";
  case Opcode::Add: return "add";
  case Opcode::Sub: return "sub";
  case Opcode::Ret: return "ret";
  case Opcode::Check: return "check";
  }
  return "?";
}

inline std::string_view to_string(CmpPred p) {
  switch (p) {
  case CmpPred::Eq: return "eq";
  case CmpPred::Ne: return "ne";
  case CmpPred::Lt: return "lt";
  case CmpPred::Le: return "le";
  case CmpPred::Gt: return "gt";
  case CmpPred::Ge: return "ge";
  }
  return "?";
}

inline std::optional<CmpPred> parse_pred(std::string_view s) {
  for (auto p : {CmpPred::Eq, CmpPred::Ne, CmpPred::Lt, CmpPred::Le, CmpPred::Gt, CmpPred::Ge})
    if (to_string(p) == s)
      return p;
  return std::nullopt;
}

// Printing ----------------------------------------------------------------

namespace detail {

inline void print_operand(std::ostream &os, const Function &fn, const Operand &o) {
  if (o.is_reg())
    os << fn.reg_names.at(o.reg);
  else
    os << o.imm;
}

inline void print_mem(std::ostream &os, const Function &fn, const Instruction &in) {
  os << '[';
  print_operand(os, fn, in.args.at(0));
  if (in.offset > 0)
    os << " + " << in.offset;
  else if (in.offset < 0)
    os << " - " << -in.offset;
  os << ']';
}

inline std::string width_suffix(const Instruction &in) {
  return in.width == 8 ? std::string() : "." + std::to_string(in.width);
}

} // namespace detail

inline void print_instruction(std::ostream &os, const Function &fn, const Instruction &in) {
  using detail::print_operand;
  if (in.has_dst())
    os << fn.reg_names.at(in.dst) << " = ";
  switch (in.op) {
  case Opcode::Load:
    os << "load" << detail::width_suffix(in) << ' ';
    detail::print_mem(os, fn, in);
    return;
  case Opcode::Store:
    os << "store" << detail::width_suffix(in) << ' ';
    detail::print_mem(os, fn, in);
    os << ", ";
    print_operand(os, fn, in.args.at(1));
    return;
  case Opcode::GlobAddr:
    os << "globaddr " << in.symbol;
    return;
  case Opcode::Call:
  case Opcode::ExtCall:
    os << mnemonic(in.op) << ' ' << in.symbol << '(';
    for (std::size_t i = 0; i < in.args.size(); ++i) {
      if (i)
        os << ", ";
      print_operand(os, fn, in.args[i]);
    }
    os << ')';
    return;
  case Opcode::Br:
    os << "br " << in.target;
    return;
  case Opcode::Cbr:
    os << "cbr ";
    print_operand(os, fn, in.args.at(0));
    os << ", " << in.target << ", " << in.target_false;
    return;
  case Opcode::Cmp:
    os << "cmp " << to_string(in.pred) << ' ';
    break;
  default:
    os << mnemonic(in.op);
    if (!in.args.empty())
      os << ' ';
    break;
  }
  for (std::size_t i = 0; i < in.args.size(); ++i) {
    if (i)
      os << ", ";
    print_operand(os, fn, in.args[i]);
  }
}

inline void print_function(std::ostream &os, const Function &fn) {
  os << "fn " << fn.name;
  if (!fn.params.empty()) {
    os << '(';
    for (std::size_t i = 0; i < fn.params.size(); ++i)
      os << (i ? ", " : "") << fn.reg_names.at(fn.params[i]);
    os << ')';
  }
  os << " {\n";
  std::multimap<std::size_t, std::string> at;
  for (const auto &[name, idx] : fn.labels)
    at.emplace(idx, name);
  for (std::size_t i = 0; i <= fn.body.size(); ++i) {
    auto [lo, hi] = at.equal_range(i);
    for (auto it = lo; it != hi; ++it)
      os << it->second << ":\n";
    if (i == fn.body.size())
      break;
    os << "  ";
    print_instruction(os, fn, fn.body[i]);
    os << '\n';
  }
  os << "}\n";
}

inline void print_program(std::ostream &os, const Program &p) {
  if (p.entry != "main")
    os << "entry " << p.entry << "\n";
  for (const auto &g : p.globals)
    os << "global " << g.name << ' ' << g.size << '\n';
  for (std::size_t i = 0; i < p.functions.size(); ++i) {
    if (i || !p.globals.empty())
      os << '\n';
    print_function(os, p.functions[i]);
  }
}

inline std::string to_text(const Program &p) {
  std::ostringstream os;
  print_program(os, p);
  return os.str();
}

/// Structural equality: same globals, functions, register names, labels and
/// instruction fields. Source line numbers and origin indices are ignored.
inline bool structurally_equal(const Program &a, const Program &b) {
  if (a.entry != b.entry || a.globals != b.globals || a.functions.size() != b.functions.size())
    return false;
  for (std::size_t i = 0; i < a.functions.size(); ++i) {
    const Function &fa = a.functions[i];
    const Function &fb = b.functions[i];
    if (fa.name != fb.name || fa.params.size() != fb.params.size() ||
        fa.labels != fb.labels || fa.body.size() != fb.body.size())
      return false;
    auto rn = [](const Function &f, std::uint32_t r) {
      return r == kNoReg ? std::string() : f.reg_names.at(r);
    };
    for (std::size_t k = 0; k < fa.params.size(); ++k)
      if (rn(fa, fa.params[k]) != rn(fb, fb.params[k]))
        return false;
    for (std::size_t k = 0; k < fa.body.size(); ++k) {
      const Instruction &x = fa.body[k];
      const Instruction &y = fb.body[k];
      if (x.op != y.op || rn(fa, x.dst) != rn(fb, y.dst) || x.symbol != y.symbol ||
          x.target != y.target || x.target_false != y.target_false || x.offset != y.offset ||
          x.width != y.width || x.pred != y.pred || x.args.size() != y.args.size())
        return false;
      for (std::size_t j = 0; j < x.args.size(); ++j) {
        const Operand &ox = x.args[j];
        const Operand &oy = y.args[j];
        if (ox.kind != oy.kind)
          return false;
        if (ox.is_reg() ? rn(fa, ox.reg) != rn(fb, oy.reg) : ox.imm != oy.imm)
          return false;
      }
    }
  }
  return true;
}

} // namespace ptauth::ir

#endif // PTAUTH_IR_HPP
