//===- bench_test.cpp - Overhead suite and report writers -----------------===//

#include "ptauth/bench.hpp"
#include "ptauth/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ptauth;

namespace {

const std::vector<BenchResult> &suite_results() {
  static const std::vector<BenchResult> rs = [] {
    BenchConfig cfg;
    cfg.reps = 10;
    return run_bench(default_suite(), cfg);
  }();
  return rs;
}

} // namespace

TEST(Bench, HeaderAbsorptionMatchesModuloRule) {
  for (std::uint64_t s = 1; s <= 512; ++s) {
    bool fits = s % 32 != 0 && s % 32 <= 24;
    EXPECT_EQ(header_absorption({s}), fits ? 1.0 : 0.0) << s;
  }
  EXPECT_DOUBLE_EQ(header_absorption({16, 32}), 0.5);
}

TEST(Bench, SuiteHasAllConfigurations) {
  const auto &rs = suite_results();
  EXPECT_EQ(rs.size(), default_suite().size() * 4);
  for (const auto &bp : default_suite())
    for (auto m : {CostAccounting::SoftwareAc, CostAccounting::FixedCycle4})
      for (bool o : {false, true})
        EXPECT_NE(find_result(rs, bp.name, m, o), nullptr) << bp.name;
}

TEST(Bench, RatiosAreConsistent) {
  for (const auto &r : suite_results()) {
    EXPECT_EQ(r.stddev, 0.0) << r.program;
    EXPECT_EQ(r.overhead_min, r.overhead_max);
    EXPECT_DOUBLE_EQ(r.overhead_ratio, double(r.instr_checked) / double(r.instr_raw));
    EXPECT_DOUBLE_EQ(r.mem_ratio, double(r.peak_checked) / double(r.peak_raw));
    EXPECT_GE(r.overhead_ratio, 1.0);
    EXPECT_GE(r.backward_share, 0.0);
    EXPECT_LE(r.backward_share, 1.0);
    if (r.mode == CostAccounting::FixedCycle4) {
      EXPECT_EQ(r.backward_steps, 0u);
    }
  }
}

TEST(Bench, MemoryRatiosFollowGranuleArithmetic) {
  const auto &rs = suite_results();
  EXPECT_EQ(find_result(rs, "alloc16", CostAccounting::SoftwareAc, true)->mem_ratio, 1.0);
  // 128-byte objects: 128 raw vs 160 with a header.
  EXPECT_DOUBLE_EQ(find_result(rs, "alloc128", CostAccounting::SoftwareAc, true)->mem_ratio, 160.0 / 128.0);
  // Mixed sizes {16,24,48,100,40,64}: raw 32+32+64+128+64+64 = 384,
  // checked 32+32+64+128+64+96 = 416.
  EXPECT_DOUBLE_EQ(find_result(rs, "alloc_mixed", CostAccounting::SoftwareAc, true)->mem_ratio, 416.0 / 384.0);
}

TEST(Bench, GatesPass) {
  for (const auto &g : bench_gates(suite_results()))
    EXPECT_TRUE(g.pass) << g.name << ": " << g.detail;
}

TEST(Bench, GateFlagsNondeterminism) {
  std::vector<BenchResult> rs = suite_results();
  rs[0].stddev = 0.01;
  auto gates = bench_gates(rs);
  EXPECT_FALSE(gates[0].pass);
}

TEST(Report, CsvHeaderAndRowShape) {
  std::ostringstream os;
  write_bench_csv(os, suite_results());
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("program,mode,optimize,reps,instr_raw,instr_checked,overhead_ratio,checks,"
                         "backward_steps,peak_raw,peak_checked,mem_ratio,mean_rss_ratio,stddev",
                         0),
            0u);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
  }
  EXPECT_EQ(rows, suite_results().size());
}

TEST(Report, JsonMatchesCsvNumbers) {
  std::ostringstream os;
  write_bench_json(os, suite_results(), bench_gates(suite_results()));
  nlohmann::json j = nlohmann::json::parse(os.str());
  ASSERT_EQ(j["results"].size(), suite_results().size());
  EXPECT_EQ(j["results"][0]["instr_checked"].get<std::uint64_t>(), suite_results()[0].instr_checked);
  EXPECT_FALSE(j["gates"].empty());
}

TEST(Report, EmptyResultSetIsAnError) {
  std::ostringstream os;
  EXPECT_THROW(write_bench_csv(os, {}), ReportError);
  EXPECT_THROW(write_bench_json(os, {}), ReportError);
}

TEST(Report, WritesThreeFiles) {
  auto dir = std::filesystem::temp_directory_path() / "ptauth_bench_test";
  std::filesystem::remove_all(dir);
  write_bench_reports(dir, suite_results(), bench_gates(suite_results()));
  for (const char *f : {"bench.csv", "bench.json", "bench.txt"})
    EXPECT_GT(std::filesystem::file_size(dir / f), 0u) << f;
  std::filesystem::remove_all(dir);
}
