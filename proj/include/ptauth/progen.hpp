//===- progen.hpp - Random mini IR program generator ------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Seeded generator of single-threaded heap programs for property sweeps.
/// All pointer arithmetic and accesses stay inside their object, so the only
/// memory errors a program can contain are the temporal ones injected on
/// purpose (use after free, double free, invalid free, stale hand-off to an
/// external). Integer and pointer storage are kept apart so raw and checked
/// runs follow the same control flow up to the first bug.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_PROGEN_HPP
#define PTAUTH_PROGEN_HPP

#include "ptauth/ir.hpp"
#include "ptauth/parser.hpp"

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ptauth {

struct GenOptions {
  std::size_t statements = 40;
  /// Probability that a program gets one injected temporal bug.
  double bug_rate = 0.35;
  bool branches = true;
  bool loops = true;
  std::size_t pointer_slots = 8;
};

namespace detail {

class ProgramGenerator {
public:
  ProgramGenerator(std::uint64_t seed, const GenOptions &opts) : rng_(seed), opts_(opts) {}

  std::string generate() {
    bool buggy = chance(opts_.bug_rate);
    bug_at_ = buggy ? 1 + pick(opts_.statements) : ~std::size_t{0};
    emit_header();
    out_ << "fn main {\n";
    for (std::size_t i = 0; i < opts_.statements; ++i) {
      if (i == bug_at_)
        inject_bug();
      statement(0);
    }
    // Leaks are fine; return something data-dependent.
    out_ << "  ret " << any_int() << "\n}\n";
    return out_.str();
  }

private:
  struct Obj {
    std::uint64_t size;
    bool live = true;   ///< live on every path
    bool dead = false;  ///< freed on some path
  };
  struct Ptr {
    std::string reg;
    std::size_t obj;
    std::uint64_t off;
  };
  struct Slot {
    bool used = false;
    std::size_t obj = 0;
    std::uint64_t off = 0;
  };

  std::uint64_t pick(std::uint64_t n) { return n ? rng_() % n : 0; }
  bool chance(double p) { return static_cast<double>(rng_() >> 11) * 0x1.0p-53 < p; }

  std::string fresh(char prefix) { return std::string(1, prefix) + std::to_string(next_++); }

  void emit_header() {
    out_ << "global slots " << opts_.pointer_slots * 8 << "\n";
    out_ << "global gdata 64\n\n";
    out_ << "fn touch(a) {\n  x = load [a]\n  y = add x, 1\n  store [a], y\n  ret y\n}\n\n";
    out_ << "fn drop(a) {\n  free a\n  ret\n}\n\n";
    out_ << "fn make(n) {\n  p = alloc 32\n  store [p], n\n  ret p\n}\n\n";
    slots_.assign(opts_.pointer_slots, Slot{});
  }

  void line(const std::string &s) { out_ << "  " << s << "\n"; }

  std::vector<std::size_t> live_ptrs(std::uint64_t min_room = 8, bool base_only = false) const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < ptrs_.size(); ++i) {
      const Ptr &p = ptrs_[i];
      const Obj &o = objs_[p.obj];
      if (o.live && !o.dead && o.size - p.off >= min_room && (!base_only || p.off == 0))
        v.push_back(i);
    }
    return v;
  }

  std::vector<std::size_t> dead_ptrs() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < ptrs_.size(); ++i)
      if (objs_[ptrs_[i].obj].dead && !objs_[ptrs_[i].obj].live)
        v.push_back(i);
    return v;
  }

  std::string any_int() {
    if (ints_.empty() || chance(0.2))
      return std::to_string(pick(100));
    return ints_[pick(ints_.size())];
  }

  std::size_t new_obj(std::uint64_t size) {
    objs_.push_back({size, true, false});
    return objs_.size() - 1;
  }

  void add_ptr(const std::string &reg, std::size_t obj, std::uint64_t off) {
    ptrs_.push_back({reg, obj, off});
  }

  void kill(std::size_t obj) {
    objs_[obj].live = false;
    objs_[obj].dead = true;
  }

  static constexpr std::uint64_t kSizes[] = {8, 16, 24, 32, 40, 48, 64, 100, 128, 256};

  // Statements -------------------------------------------------------------

  void statement(int depth) {
    enum Kind { Alloc, Load, Store, PtrAdd, Copy, Free, SlotStore, SlotLoad, Touch, Drop, OpaqueFree,
                Realloc, Print, MemCopy, Branch, Loop, Make, Global, Arith, NumKinds };
    static constexpr unsigned weight[NumKinds] = {8, 10, 10, 4, 3, 3, 3, 3, 2, 1, 1, 2, 1, 2, 2, 2, 1, 2, 3};
    unsigned total = 0;
    for (unsigned w : weight)
      total += w;
    for (int attempt = 0; attempt < 8; ++attempt) {
      std::uint64_t r = pick(total);
      unsigned k = 0;
      while (r >= weight[k])
        r -= weight[k++];
      if (try_statement(static_cast<Kind>(k), depth))
        return;
    }
    do_alloc();
  }

  void do_alloc() {
    std::string r = fresh('p');
    std::uint64_t size = kSizes[pick(std::size(kSizes))];
    line(r + " = alloc " + std::to_string(size));
    add_ptr(r, new_obj(size), 0);
  }

  /// Offset for an access of \p w bytes through \p p, kept in bounds.
  std::uint64_t access_offset(const Ptr &p, std::uint64_t w) {
    std::uint64_t room = objs_[p.obj].size - p.off;
    return pick((room - w) / w + 1) * w;
  }

  static std::string mem(const std::string &reg, std::uint64_t off) {
    return off ? "[" + reg + " + " + std::to_string(off) + "]" : "[" + reg + "]";
  }

  bool try_statement(int kind, int depth) {
    const bool nested = depth > 0;
    switch (kind) {
    case 0: do_alloc(); return true;
    case 1:
    case 2: {
      auto c = live_ptrs();
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      static constexpr std::uint64_t widths[] = {1, 2, 4, 8, 8, 8};
      std::uint64_t w = widths[pick(std::size(widths))];
      std::string sfx = w == 8 ? "" : "." + std::to_string(w);
      std::uint64_t off = access_offset(p, w);
      if (kind == 1) {
        std::string d = fresh('i');
        line(d + " = load" + sfx + " " + mem(p.reg, off));
        ints_.push_back(d);
      } else {
        line("store" + sfx + " " + mem(p.reg, off) + ", " + any_int());
      }
      return true;
    }
    case 3: {
      auto c = live_ptrs(16);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      std::uint64_t k = pick(objs_[p.obj].size - p.off - 8 + 1);
      std::string d = fresh('q');
      line(d + " = ptradd " + p.reg + ", " + std::to_string(k));
      add_ptr(d, p.obj, p.off + k);
      return true;
    }
    case 4: {
      if (ptrs_.empty())
        return false;
      const Ptr p = ptrs_[pick(ptrs_.size())];
      std::string d = fresh('a');
      line(d + " = copy " + p.reg);
      add_ptr(d, p.obj, p.off);
      return true;
    }
    case 5:
    case 9:
    case 10: {
      if (nested && depth > 1)
        return false;
      auto c = live_ptrs(1, true);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      if (kind == 5)
        line("free " + p.reg);
      else if (kind == 9)
        line("call drop(" + p.reg + ")");
      else
        line("extcall opaque_free(" + p.reg + ")");
      kill(p.obj);
      return true;
    }
    case 6: {
      auto c = live_ptrs(1);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      std::size_t j = pick(slots_.size());
      std::string g = fresh('g');
      line(g + " = globaddr slots");
      line("store " + mem(g, j * 8) + ", " + p.reg);
      slots_[j] = {true, p.obj, p.off};
      return true;
    }
    case 7: {
      std::vector<std::size_t> used;
      for (std::size_t j = 0; j < slots_.size(); ++j)
        if (slots_[j].used)
          used.push_back(j);
      if (used.empty())
        return false;
      std::size_t j = used[pick(used.size())];
      std::string g = fresh('g');
      std::string d = fresh('s');
      line(g + " = globaddr slots");
      line(d + " = load " + mem(g, j * 8));
      add_ptr(d, slots_[j].obj, slots_[j].off);
      return true;
    }
    case 8: {
      auto c = live_ptrs(8);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      std::string d = fresh('i');
      line(d + " = call touch(" + p.reg + ")");
      ints_.push_back(d);
      return true;
    }
    case 11: {
      if (depth > 1)
        return false;
      auto c = live_ptrs(1, true);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      std::string d = fresh('p');
      std::uint64_t size = kSizes[pick(std::size(kSizes))];
      line(d + " = realloc " + p.reg + ", " + std::to_string(size));
      kill(p.obj);
      add_ptr(d, new_obj(size), 0);
      return true;
    }
    case 12: {
      auto c = live_ptrs(1);
      if (c.empty())
        return false;
      const Ptr p = ptrs_[c[pick(c.size())]];
      std::uint64_t last = objs_[p.obj].size - p.off - 1;
      line("store.1 " + mem(p.reg, last) + ", 0");
      line("extcall print_str(" + p.reg + ")");
      return true;
    }
    case 13: {
      auto c = live_ptrs(8);
      if (c.size() < 2)
        return false;
      const Ptr a = ptrs_[c[pick(c.size())]];
      const Ptr b = ptrs_[c[pick(c.size())]];
      if (a.obj == b.obj)
        return false;
      std::uint64_t n = std::min(objs_[a.obj].size - a.off, objs_[b.obj].size - b.off);
      n = 1 + pick(n);
      if (chance(0.5)) {
        std::string d = fresh('m');
        line(d + " = extcall mem_copy(" + a.reg + ", " + b.reg + ", " + std::to_string(n) + ")");
        add_ptr(d, a.obj, a.off);
      } else {
        line("extcall mem_copy(" + a.reg + ", " + b.reg + ", " + std::to_string(n) + ")");
      }
      return true;
    }
    case 14: {
      if (!opts_.branches || depth > 1)
        return false;
      branch(depth);
      return true;
    }
    case 15: {
      if (!opts_.loops || depth > 0)
        return false;
      loop();
      return true;
    }
    case 16: {
      std::string d = fresh('p');
      line(d + " = call make(" + any_int() + ")");
      add_ptr(d, new_obj(32), 0);
      return true;
    }
    case 17: {
      std::string g = fresh('g');
      line(g + " = globaddr gdata");
      std::uint64_t off = pick(8) * 8;
      if (chance(0.5)) {
        std::string d = fresh('i');
        line(d + " = load " + mem(g, off));
        ints_.push_back(d);
      } else {
        line("store " + mem(g, off) + ", " + any_int());
      }
      return true;
    }
    case 18: {
      std::string d = fresh('i');
      static constexpr const char *ops[] = {"add", "sub"};
      line(d + " = " + ops[pick(2)] + " " + any_int() + ", " + any_int());
      ints_.push_back(d);
      return true;
    }
    }
    return false;
  }

  struct Snapshot {
    std::vector<Obj> objs;
    std::vector<Ptr> ptrs;
    std::vector<Slot> slots;
    std::vector<std::string> ints;
  };

  Snapshot save() const { return {objs_, ptrs_, slots_, ints_}; }

  /// Joins the current state (one arm) with \p other (the other arm).
  void join(const Snapshot &other, std::size_t objs_before, std::size_t ptrs_before,
            std::size_t ints_before) {
    // Objects created inside an arm are not reachable after the join through
    // registers defined in that arm; keep them but mark them unusable.
    for (std::size_t i = 0; i < objs_.size(); ++i) {
      if (i < other.objs.size()) {
        objs_[i].live = objs_[i].live && other.objs[i].live;
        objs_[i].dead = objs_[i].dead || other.objs[i].dead;
      }
    }
    ptrs_.resize(ptrs_before);
    ints_.resize(ints_before);
    for (std::size_t j = 0; j < slots_.size(); ++j)
      if (!(slots_[j].used && other.slots[j].used && slots_[j].obj == other.slots[j].obj &&
            slots_[j].off == other.slots[j].off && slots_[j].obj < objs_before))
        slots_[j].used = false;
  }

  void branch(int depth) {
    std::string c = fresh('c');
    std::string lt = fresh('T');
    std::string lf = fresh('F');
    std::string lj = fresh('J');
    static constexpr const char *preds[] = {"eq", "ne", "lt", "le", "gt", "ge"};
    line(c + " = cmp " + std::string(preds[pick(6)]) + " " + any_int() + ", " + any_int());
    line("cbr " + c + ", " + lt + ", " + lf);
    Snapshot before = save();
    std::size_t objs_before = objs_.size();
    std::size_t ptrs_before = ptrs_.size();
    std::size_t ints_before = ints_.size();

    out_ << lt << ":\n";
    std::size_t n = 1 + pick(4);
    for (std::size_t i = 0; i < n; ++i)
      statement(depth + 1);
    line("br " + lj);
    Snapshot after_true = save();

    objs_ = before.objs;
    objs_.resize(after_true.objs.size(), Obj{0, false, true});
    ptrs_ = before.ptrs;
    slots_ = before.slots;
    ints_ = before.ints;
    out_ << lf << ":\n";
    n = pick(4);
    for (std::size_t i = 0; i < n; ++i)
      statement(depth + 1);
    out_ << lj << ":\n";
    Snapshot t = after_true;
    t.objs.resize(objs_.size(), Obj{0, false, true});
    objs_.resize(std::max(objs_.size(), t.objs.size()), Obj{0, false, true});
    join(t, objs_before, ptrs_before, ints_before);
  }

  void loop() {
    std::string i = fresh('n');
    std::string c = fresh('c');
    std::string head = fresh('L');
    std::string done = fresh('E');
    line(i + " = const " + std::to_string(1 + pick(5)));
    out_ << head << ":\n";
    std::size_t ptrs_before = ptrs_.size();
    std::size_t ints_before = ints_.size();
    // Body: in-bounds accesses on objects live at entry, plus a private
    // alloc/free pair. Nothing allocated in the body survives an iteration.
    std::size_t n = 1 + pick(4);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t r = pick(6);
      if (r == 0) {
        std::string t = fresh('t');
        std::uint64_t size = kSizes[pick(std::size(kSizes))];
        line(t + " = alloc " + std::to_string(size));
        line("store " + mem(t, 0) + ", " + i);
        std::string d = fresh('i');
        line(d + " = load " + mem(t, 0));
        line("free " + t);
      } else if (r <= 2) {
        try_statement(1, 1);
      } else if (r <= 4) {
        try_statement(2, 1);
      } else {
        try_statement(8, 1);
      }
    }
    ptrs_.resize(ptrs_before);
    ints_.resize(ints_before);
    line(i + " = sub " + i + ", 1");
    line(c + " = cmp gt " + i + ", 0");
    line("cbr " + c + ", " + head + ", " + done);
    out_ << done << ":\n";
  }

  // Bugs ---------------------------------------------------------------------

  void inject_bug() {
    auto dead = dead_ptrs();
    if (dead.empty()) {
      auto c = live_ptrs(8, true);
      if (c.empty()) {
        do_alloc();
        c = live_ptrs(8, true);
      }
      const Ptr p = ptrs_[c[pick(c.size())]];
      if (chance(0.3)) {
        // Invalid free of an interior pointer or a global.
        if (chance(0.5) && objs_[p.obj].size >= 32) {
          std::string d = fresh('q');
          line(d + " = ptradd " + p.reg + ", " + std::to_string(8 + pick(objs_[p.obj].size - 16)));
          line("free " + d);
        } else {
          std::string g = fresh('g');
          line(g + " = globaddr gdata");
          line("free " + g);
        }
        return;
      }
      std::string alias = fresh('a');
      line(alias + " = copy " + p.reg);
      line("free " + p.reg);
      kill(p.obj);
      add_ptr(alias, p.obj, 0);
      dead = {ptrs_.size() - 1};
      // Let the allocator reuse the slot before the stale use.
      if (chance(0.5))
        do_alloc();
    }
    const Ptr p = ptrs_[dead[pick(dead.size())]];
    switch (pick(4)) {
    case 0: {
      std::string d = fresh('i');
      line(d + " = load " + mem(p.reg, 0));
      break;
    }
    case 1: line("store " + mem(p.reg, 0) + ", 7"); break;
    case 2: line(p.off == 0 ? "free " + p.reg : "extcall opaque_keep(" + p.reg + ")"); break;
    default: line("extcall print_str(" + p.reg + ")"); break;
    }
  }

  std::mt19937_64 rng_;
  GenOptions opts_;
  std::ostringstream out_;
  std::size_t bug_at_ = 0;
  std::size_t next_ = 0;
  std::vector<Obj> objs_;
  std::vector<Ptr> ptrs_;
  std::vector<Slot> slots_;
  std::vector<std::string> ints_;
};

} // namespace detail

inline std::string generate_program_text(std::uint64_t seed, const GenOptions &opts = {}) {
  return detail::ProgramGenerator(seed, opts).generate();
}

inline ir::Program generate_program(std::uint64_t seed, const GenOptions &opts = {}) {
  return ir::parse_program_or_throw(generate_program_text(seed, opts));
}

} // namespace ptauth

#endif // PTAUTH_PROGEN_HPP
