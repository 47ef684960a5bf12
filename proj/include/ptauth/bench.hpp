//===- bench.hpp - Synthetic overhead benchmarks ----------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Synthetic allocation, pointer-chase and interior-pointer workloads, run
/// raw and checked. Overhead is measured in cost units (retired program
/// instructions plus the runtime's charged work), which is deterministic;
/// wall-clock time is recorded alongside but never gated on.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_BENCH_HPP
#define PTAUTH_BENCH_HPP

#include "ptauth/instrumenter.hpp"
#include "ptauth/interpreter.hpp"
#include "ptauth/parser.hpp"
#include "ptauth/sim_memory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace ptauth {

struct BenchProgram {
  std::string name;
  std::string text;
  /// Sizes of the objects the workload keeps live at its peak, cycled.
  std::vector<std::uint64_t> object_sizes;
  /// Dominated by dereference checks.
  bool check_heavy = false;
};

namespace detail {

inline std::string alloc_workload(const std::vector<std::uint64_t> &sizes, std::uint64_t rounds) {
  std::uint64_t per_round = sizes.size();
  std::ostringstream p;
  p << "global table " << 8 * per_round * rounds << "\n\n"
    << "fn main {\n"
    << "  t = globaddr table\n"
    << "  n = const 0\n"
    << "  off = const 0\n"
    << "fill:\n";
  for (std::uint64_t s : sizes) {
    p << "  p = alloc " << s << "\n"
      << "  store [p], n\n"
      << "  store [p + " << (s >= 16 ? 8 : 0) << "], off\n"
      << "  slot = ptradd t, off\n"
      << "  store [slot], p\n"
      << "  off = add off, 8\n";
  }
  p << "  n = add n, 1\n"
    << "  c = cmp lt n, " << rounds << "\n"
    << "  cbr c, fill, drain\n"
    << "drain:\n"
    << "  off = const 0\n"
    << "  sum = const 0\n"
    << "  k = const 0\n"
    << "next:\n"
    << "  slot = ptradd t, off\n"
    << "  q = load [slot]\n"
    << "  v = load [q]\n"
    << "  w = load [q + 8]\n"
    << "  sum = add sum, v\n"
    << "  sum = add sum, w\n"
    << "  free q\n"
    << "  off = add off, 8\n"
    << "  k = add k, 1\n"
    << "  c = cmp lt k, " << per_round * rounds << "\n"
    << "  cbr c, next, done\n"
    << "done:\n"
    << "  ret sum\n"
    << "}\n";
  return p.str();
}

inline std::string pointer_chase(std::uint64_t nodes, std::uint64_t passes) {
  std::ostringstream p;
  p << "global head 8\n\n"
    << "fn main {\n"
    << "  prev = const 0\n"
    << "  i = const 0\n"
    << "build:\n"
    << "  node = alloc 32\n"
    << "  store [node], prev\n"
    << "  store [node + 8], i\n"
    << "  store [node + 16], i\n"
    << "  prev = copy node\n"
    << "  i = add i, 1\n"
    << "  c = cmp lt i, " << nodes << "\n"
    << "  cbr c, build, publish\n"
    << "publish:\n"
    << "  h = globaddr head\n"
    << "  store [h], prev\n"
    << "  sum = const 0\n"
    << "  pass = const 0\n"
    << "walk:\n"
    << "  cur = load [h]\n"
    << "hop:\n"
    << "  v = load [cur + 8]\n"
    << "  u = load [cur + 16]\n"
    << "  sum = add sum, v\n"
    << "  sum = sub sum, u\n"
    << "  cur = load [cur]\n"
    << "  c = cmp ne cur, 0\n"
    << "  cbr c, hop, rewind\n"
    << "rewind:\n"
    << "  pass = add pass, 1\n"
    << "  c = cmp lt pass, " << passes << "\n"
    << "  cbr c, walk, done\n"
    << "done:\n"
    << "  ret sum\n"
    << "}\n";
  return p.str();
}

/// Interior-pointer walks over large arrays from a callee, so the array
/// pointer arrives as an opaque parameter and every access searches back to
/// the array base.
inline std::string interior_walk(std::uint64_t arrays, std::uint64_t size, std::uint64_t passes) {
  std::ostringstream p;
  p << "fn scan(a, len) {\n"
    << "  s = const 0\n"
    << "  off = const 0\n"
    << "loop:\n"
    << "  q = ptradd a, off\n"
    << "  x = load [q]\n"
    << "  y = load [q + 8]\n"
    << "  s = add s, x\n"
    << "  s = add s, y\n"
    << "  s = sub s, 3\n"
    << "  off = add off, 16\n"
    << "  c = cmp lt off, len\n"
    << "  cbr c, loop, out\n"
    << "out:\n"
    << "  ret s\n"
    << "}\n\n"
    << "fn main {\n"
    << "  total = const 0\n"
    << "  k = const 0\n"
    << "outer:\n"
    << "  arr = alloc " << size << "\n"
    << "  off = const 0\n"
    << "init:\n"
    << "  e = ptradd arr, off\n"
    << "  store [e], off\n"
    << "  off = add off, 8\n"
    << "  c = cmp lt off, " << size << "\n"
    << "  cbr c, init, use\n"
    << "use:\n"
    << "  pass = const 0\n"
    << "again:\n"
    << "  r = call scan(arr, " << size << ")\n"
    << "  total = add total, r\n"
    << "  pass = add pass, 1\n"
    << "  c = cmp lt pass, " << passes << "\n"
    << "  cbr c, again, release\n"
    << "release:\n"
    << "  free arr\n"
    << "  k = add k, 1\n"
    << "  c = cmp lt k, " << arrays << "\n"
    << "  cbr c, outer, done\n"
    << "done:\n"
    << "  ret total\n"
    << "}\n";
  return p.str();
}

} // namespace detail

/// The default suite.
inline std::vector<BenchProgram> default_suite() {
  const std::vector<std::uint64_t> mixed = {16, 24, 48, 100, 40, 64};
  return {
      {"alloc16", detail::alloc_workload({16}, 512), {16}, false},
      {"alloc_mixed", detail::alloc_workload(mixed, 96), mixed, false},
      {"alloc128", detail::alloc_workload({128}, 256), {128}, false},
      {"ptrchase", detail::pointer_chase(256, 24), {32}, true},
      {"interior", detail::interior_walk(8, 1024, 6), {1024}, true},
  };
}

/// Fraction of \p sizes whose header fits in the padding of the raw chunk.
inline double header_absorption(const std::vector<std::uint64_t> &sizes) {
  if (sizes.empty())
    return 0.0;
  std::size_t n = 0;
  for (std::uint64_t s : sizes)
    n += chunk_footprint(s, true) == chunk_footprint(s, false);
  return double(n) / double(sizes.size());
}

struct BenchConfig {
  RuntimeConfig runtime;
  std::size_t reps = 10;
};

struct BenchResult {
  std::string program;
  CostAccounting mode = CostAccounting::SoftwareAc;
  bool optimize = true;
  std::size_t reps = 0;
  std::uint64_t retired = 0;       ///< program instructions, equal in both runs
  std::uint64_t instr_raw = 0;     ///< raw cost units
  std::uint64_t instr_checked = 0; ///< checked cost units
  double overhead_ratio = 0.0;     ///< mean over reps
  double stddev = 0.0;
  double overhead_min = 0.0;
  double overhead_max = 0.0;
  std::uint64_t checks = 0;
  std::uint64_t backward_steps = 0;
  std::map<std::uint64_t, std::uint64_t> step_histogram;
  double backward_share = 0.0; ///< backward-search units / all check units
  std::uint64_t peak_raw = 0;
  std::uint64_t peak_checked = 0;
  double mem_ratio = 0.0;
  double mean_rss_ratio = 0.0;
  std::size_t sites_total = 0;
  std::size_t sites_elided = 0;
  double header_absorption = 0.0;
  bool check_heavy = false;
  double wall_ms = 0.0;
};

inline std::string_view mode_name(CostAccounting a) {
  return a == CostAccounting::SoftwareAc ? "software" : "fixed4";
}

inline double mean_of(const std::vector<double> &v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

/// Sample standard deviation; 0 for fewer than two values. Identical samples
/// give exactly 0 (summing them first would leave rounding residue).
inline double stddev_of(const std::vector<double> &v) {
  if (v.size() < 2 || std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
    return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v)
    acc += (x - m) * (x - m);
  return std::sqrt(acc / double(v.size() - 1));
}

inline BenchResult run_bench_one(const BenchProgram &bp, CostAccounting mode, bool optimize,
                                 const BenchConfig &cfg) {
  ir::Program prog = ir::parse_program_or_throw(bp.text);
  InstrumentOptions io;
  io.optimize = optimize;
  InstrumentResult inst = instrument(prog, io);

  BenchResult r;
  r.program = bp.name;
  r.mode = mode;
  r.optimize = optimize;
  r.reps = cfg.reps;
  r.sites_total = inst.sites.size();
  r.sites_elided = inst.elided();
  r.header_absorption = header_absorption(bp.object_sizes);
  r.check_heavy = bp.check_heavy;

  std::vector<double> ratios;
  double wall = 0.0;
  for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
    RunOptions ro;
    ro.runtime = cfg.runtime;
    ro.runtime.accounting = mode;
    auto t0 = std::chrono::steady_clock::now();
    ro.mode = ExecMode::Raw;
    RunReport raw = interpret(prog, ro);
    ro.mode = ExecMode::Checked;
    RunReport chk = interpret(inst.program, ro);
    wall += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!raw.verdict.clean() || !chk.verdict.clean())
      throw std::runtime_error("benchmark '" + bp.name + "' did not run clean: " +
                               std::string(to_string(chk.verdict.kind)) + " " + chk.verdict.detail);
    ratios.push_back(double(chk.cost_units) / double(raw.cost_units));
    if (rep == 0) {
      r.retired = raw.instructions_retired;
      r.instr_raw = raw.cost_units;
      r.instr_checked = chk.cost_units;
      r.checks = chk.checks_executed;
      r.backward_steps = chk.backward_steps;
      r.step_histogram = chk.step_histogram;
      r.backward_share = chk.check_cost_units ? double(chk.backward_cost_units) / double(chk.check_cost_units)
                                              : 0.0;
      r.peak_raw = raw.peak_bytes;
      r.peak_checked = chk.peak_bytes;
      r.mem_ratio = raw.peak_bytes ? double(chk.peak_bytes) / double(raw.peak_bytes) : 0.0;
      r.mean_rss_ratio = raw.mean_bytes > 0 ? chk.mean_bytes / raw.mean_bytes : 0.0;
    }
  }
  r.overhead_ratio = mean_of(ratios);
  r.stddev = stddev_of(ratios);
  r.overhead_min = ratios.empty() ? 0.0 : *std::min_element(ratios.begin(), ratios.end());
  r.overhead_max = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
  r.wall_ms = cfg.reps ? wall / double(cfg.reps) : 0.0;
  return r;
}

/// Every program under {software, fixed4} x {optimize off, on}.
inline std::vector<BenchResult> run_bench(const std::vector<BenchProgram> &suite, const BenchConfig &cfg = {}) {
  std::vector<BenchResult> out;
  for (const auto &bp : suite)
    for (CostAccounting mode : {CostAccounting::SoftwareAc, CostAccounting::FixedCycle4})
      for (bool opt : {false, true})
        out.push_back(run_bench_one(bp, mode, opt, cfg));
  return out;
}

struct GateResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

inline const BenchResult *find_result(const std::vector<BenchResult> &rs, std::string_view program,
                                      CostAccounting mode, bool optimize) {
  for (const auto &r : rs)
    if (r.program == program && r.mode == mode && r.optimize == optimize)
      return &r;
  return nullptr;
}

/// Gates on a bench run: reproducibility, memory ratios, elision benefit
/// and the fixed-cycle estimate.
inline std::vector<GateResult> bench_gates(const std::vector<BenchResult> &rs) {
  std::vector<GateResult> gates;
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };

  GateResult det{"deterministic_reps", true, ""};
  for (const auto &r : rs) {
    if (r.reps < 10 || r.stddev != 0.0) {
      det.pass = false;
      det.detail += r.program + "/" + std::string(mode_name(r.mode)) + " stddev=" + fmt(r.stddev) +
                    " reps=" + std::to_string(r.reps) + "; ";
    }
  }
  gates.push_back(det);

  if (const BenchResult *a = find_result(rs, "alloc16", CostAccounting::SoftwareAc, true)) {
    gates.push_back({"mem_ratio_alloc16_exact", a->mem_ratio == 1.0, "ratio=" + fmt(a->mem_ratio)});
  }
  if (const BenchResult *m = find_result(rs, "alloc_mixed", CostAccounting::SoftwareAc, true)) {
    bool ok = m->mem_ratio <= 1.10 && m->header_absorption >= 0.5;
    gates.push_back({"mem_ratio_alloc_mixed", ok,
                     "ratio=" + fmt(m->mem_ratio) + " absorbed=" + fmt(m->header_absorption)});
  }

  GateResult elide{"optimize_reduces_overhead", true, ""};
  for (const auto &r : rs) {
    if (!r.optimize || r.sites_elided == 0)
      continue;
    const BenchResult *off = find_result(rs, r.program, r.mode, false);
    if (!off || !(r.overhead_ratio < off->overhead_ratio) || !(r.checks < off->checks)) {
      elide.pass = false;
      elide.detail += r.program + "/" + std::string(mode_name(r.mode)) + "; ";
    }
  }
  gates.push_back(elide);

  GateResult fixed{"fixed4_below_software", true, ""};
  for (const auto &r : rs) {
    if (!r.check_heavy || r.mode != CostAccounting::FixedCycle4)
      continue;
    const BenchResult *sw = find_result(rs, r.program, CostAccounting::SoftwareAc, r.optimize);
    if (!sw || !(r.overhead_ratio < sw->overhead_ratio)) {
      fixed.pass = false;
      fixed.detail += r.program + (r.optimize ? "/opt" : "/noopt") + "; ";
    }
  }
  gates.push_back(fixed);
  return gates;
}

} // namespace ptauth

#endif // PTAUTH_BENCH_HPP
