//===- report.hpp - CSV/JSON/text emitters ----------------------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Serialisation for bench results, check-site tables, run reports and the
/// corpus manifest. JSON goes through nlohmann::json; CSV and JSON carry the
/// same numbers.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_REPORT_HPP
#define PTAUTH_REPORT_HPP

#include "ptauth/bench.hpp"
#include "ptauth/corpus.hpp"
#include "ptauth/instrumenter.hpp"
#include "ptauth/interpreter.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptauth {

class ReportError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> &bench_csv_columns() {
  static const std::vector<std::string> cols = {
      "program",        "mode",          "optimize",     "reps",         "instr_raw",
      "instr_checked",  "overhead_ratio", "checks",      "backward_steps", "peak_raw",
      "peak_checked",   "mem_ratio",     "mean_rss_ratio", "stddev",     "overhead_min",
      "overhead_max",   "backward_share", "sites_total", "sites_elided", "wall_ms"};
  return cols;
}

inline nlohmann::ordered_json to_json(const BenchResult &r) {
  nlohmann::ordered_json j;
  j["program"] = r.program;
  j["mode"] = std::string(mode_name(r.mode));
  j["optimize"] = r.optimize ? "on" : "off";
  j["reps"] = r.reps;
  j["instr_raw"] = r.instr_raw;
  j["instr_checked"] = r.instr_checked;
  j["overhead_ratio"] = r.overhead_ratio;
  j["checks"] = r.checks;
  j["backward_steps"] = r.backward_steps;
  j["peak_raw"] = r.peak_raw;
  j["peak_checked"] = r.peak_checked;
  j["mem_ratio"] = r.mem_ratio;
  j["mean_rss_ratio"] = r.mean_rss_ratio;
  j["stddev"] = r.stddev;
  j["overhead_min"] = r.overhead_min;
  j["overhead_max"] = r.overhead_max;
  j["backward_share"] = r.backward_share;
  j["sites_total"] = r.sites_total;
  j["sites_elided"] = r.sites_elided;
  j["wall_ms"] = r.wall_ms;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto &[steps, n] : r.step_histogram)
    hist[std::to_string(steps)] = n;
  j["step_histogram"] = hist;
  return j;
}

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

inline std::string csv_cell(const nlohmann::ordered_json &v) {
  if (v.is_string())
    return v.get<std::string>();
  if (v.is_number_float())
    return csv_number(v.get<double>());
  return v.dump();
}

inline void require_nonempty(const std::vector<BenchResult> &rs) {
  if (rs.empty())
    throw ReportError("empty result set: nothing to report");
}

} // namespace detail

inline void write_bench_csv(std::ostream &os, const std::vector<BenchResult> &rs) {
  detail::require_nonempty(rs);
  const auto &cols = bench_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i)
    os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto &r : rs) {
    nlohmann::ordered_json j = to_json(r);
    for (std::size_t i = 0; i < cols.size(); ++i)
      os << (i ? "," : "") << detail::csv_cell(j[cols[i]]);
    os << '\n';
  }
}

inline void write_bench_json(std::ostream &os, const std::vector<BenchResult> &rs,
                             const std::vector<GateResult> &gates = {}) {
  detail::require_nonempty(rs);
  nlohmann::ordered_json j;
  j["results"] = nlohmann::ordered_json::array();
  for (const auto &r : rs)
    j["results"].push_back(to_json(r));
  j["gates"] = nlohmann::ordered_json::array();
  for (const auto &g : gates)
    j["gates"].push_back({{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
  os << j.dump(2) << '\n';
}

inline void write_bench_text(std::ostream &os, const std::vector<BenchResult> &rs,
                             const std::vector<GateResult> &gates = {}) {
  detail::require_nonempty(rs);
  os << std::left << std::setw(12) << "program" << std::setw(10) << "mode" << std::setw(5) << "opt"
     << std::right << std::setw(11) << "overhead" << std::setw(9) << "checks" << std::setw(10) << "bsteps"
     << std::setw(9) << "bshare" << std::setw(9) << "mem" << std::setw(9) << "rss" << std::setw(9)
     << "elided" << '\n';
  for (const auto &r : rs) {
    os << std::left << std::setw(12) << r.program << std::setw(10) << mode_name(r.mode) << std::setw(5)
       << (r.optimize ? "on" : "off") << std::right << std::fixed << std::setprecision(4) << std::setw(11)
       << r.overhead_ratio << std::setw(9) << r.checks << std::setw(10) << r.backward_steps
       << std::setw(9) << r.backward_share << std::setw(9) << r.mem_ratio << std::setw(9)
       << r.mean_rss_ratio << std::setw(9) << (std::to_string(r.sites_elided) + "/" +
                                               std::to_string(r.sites_total))
       << '\n';
  }
  os.unsetf(std::ios::fixed);
  for (const auto &g : gates)
    os << (g.pass ? "PASS " : "FAIL ") << g.name << (g.detail.empty() ? "" : "  " + g.detail) << '\n';
}

/// Writes bench.csv, bench.json and bench.txt under \p dir.
inline void write_bench_reports(const std::filesystem::path &dir, const std::vector<BenchResult> &rs,
                                const std::vector<GateResult> &gates) {
  detail::require_nonempty(rs);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ReportError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char *name) {
    std::ofstream f(dir / name);
    if (!f)
      throw ReportError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("bench.csv");
    write_bench_csv(f, rs);
  }
  {
    auto f = open("bench.json");
    write_bench_json(f, rs, gates);
  }
  {
    auto f = open("bench.txt");
    write_bench_text(f, rs, gates);
  }
}

inline nlohmann::ordered_json sites_to_json(const std::vector<CheckSite> &sites) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto &s : sites)
    arr.push_back({{"function", s.function},
                   {"index", s.index},
                   {"kind", std::string(to_string(s.kind))},
                   {"register", s.reg},
                   {"elided", s.elided},
                   {"reason", std::string(to_string(s.reason))}});
  return arr;
}

inline nlohmann::ordered_json to_json(const Verdict &v) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(v.kind));
  if (v.is_violation())
    j["violation"] = std::string(to_string(v.violation));
  if (!v.clean()) {
    j["function"] = v.function;
    j["index"] = v.index;
    j["origin"] = v.origin;
    j["event"] = v.event;
  }
  if (!v.detail.empty())
    j["detail"] = v.detail;
  return j;
}

inline nlohmann::ordered_json to_json(const RunReport &r) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(r.mode));
  j["verdict"] = to_json(r.verdict);
  j["instructions_retired"] = r.instructions_retired;
  j["checks_executed"] = r.checks_executed;
  j["backward_steps"] = r.backward_steps;
  j["cost_units"] = r.cost_units;
  j["peak_bytes"] = r.peak_bytes;
  j["mean_bytes"] = r.mean_bytes;
  if (r.return_value)
    j["return_value"] = *r.return_value;
  j["output"] = r.output;
  nlohmann::ordered_json oracle = nlohmann::ordered_json::array();
  for (const auto &e : r.oracle)
    oracle.push_back({{"kind", std::string(to_string(e.kind))},
                      {"function", e.function},
                      {"origin", e.origin},
                      {"event", e.event}});
  j["oracle"] = oracle;
  return j;
}

inline nlohmann::ordered_json to_json(const HeapEvent &e) {
  return {{"event", std::string(to_string(e.kind))}, {"address", e.address}, {"size", e.size}};
}

/// Writes one .ir file per case plus manifest.json under \p dir.
inline void write_corpus(const std::filesystem::path &dir, const std::vector<CorpusCase> &cases) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ReportError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto &c : cases) {
    std::ofstream f(dir / (c.id + ".ir"));
    if (!f)
      throw ReportError("cannot write " + (dir / (c.id + ".ir")).string());
    f << c.text;
    manifest.push_back({{"id", c.id},
                        {"category", std::string(to_string(c.category))},
                        {"cwe", std::string(cwe(c.category))},
                        {"variant", std::string(to_string(c.variant))},
                        {"pattern", c.pattern},
                        {"expected", c.expects_violation()
                                         ? std::string(to_string(expected_outcome(c.category)))
                                         : std::string("clean")}});
  }
  std::ofstream m(dir / "manifest.json");
  if (!m)
    throw ReportError("cannot write " + (dir / "manifest.json").string());
  m << manifest.dump(2) << '\n';
}

inline void write_corpus_summary(std::ostream &os, const CorpusSummary &s) {
  for (auto cat : {BugCategory::UseAfterFree, BugCategory::DoubleFree, BugCategory::InvalidFree}) {
    const CategoryStats &st = s.categories[static_cast<std::size_t>(cat)];
    os << std::left << std::setw(14) << to_string(cat) << std::setw(9) << cwe(cat) << " detected "
       << st.detected << "/" << st.vulnerable << "  false positives " << st.false_positives << "/"
       << st.patched << '\n';
  }
  os << "frees " << s.frees << "  free backward steps " << s.free_backward_steps << '\n';
  for (const auto &f : s.failures())
    os << "MISMATCH " << f << '\n';
}

} // namespace ptauth

#endif // PTAUTH_REPORT_HPP
