//===- parser_test.cpp - Mini IR reader and printer -----------------------===//

#include "ptauth/parser.hpp"
#include "ptauth/progen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ptauth;
using namespace ptauth::ir;

namespace {

const char *kSmall = R"(
; comment line
global table 64
entry main

fn helper(a, b) {
  c = add a, b
  ret c
}

fn main {
  p = alloc 48            ; trailing comment
  store.4 [p + 8], -3
  v = load.4 [p + 8]
  q = ptradd p, 16
  g = globaddr table
  s = call helper(v, 2)
  extcall print_str(g)
  c = cmp lt s, 0x10
  cbr c, yes, no
yes:
  free p
  br out
no:
  free q
out:
  ret s
}
)";

std::string slurp(const std::filesystem::path &p) {
  std::ifstream f(p);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

} // namespace

TEST(Parser, ReadsEveryConstruct) {
  ParseResult r = parse_program(kSmall);
  ASSERT_TRUE(r.ok()) << format(r.diagnostics.front());
  const Program &p = r.program;
  ASSERT_EQ(p.globals.size(), 1u);
  EXPECT_EQ(p.globals[0].size, 64u);
  EXPECT_EQ(p.entry, "main");
  const Function *m = p.find("main");
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(p.find("helper")->params.size(), 2u);
  EXPECT_EQ(m->body[1].op, Opcode::Store);
  EXPECT_EQ(m->body[1].width, 4);
  EXPECT_EQ(m->body[1].offset, 8);
  EXPECT_EQ(m->body[1].args[1].imm, -3);
  EXPECT_EQ(m->body[7].pred, CmpPred::Lt);
  EXPECT_EQ(m->body[7].args[1].imm, 16);
  EXPECT_EQ(m->label_index("yes"), 9u);
  EXPECT_EQ(m->label_index("out"), 12u);
  for (std::size_t i = 0; i < m->body.size(); ++i)
    EXPECT_EQ(m->body[i].origin, i);
}

TEST(Parser, PrintThenParseIsIdentity) {
  Program a = parse_program_or_throw(kSmall);
  Program b = parse_program_or_throw(to_text(a));
  EXPECT_TRUE(structurally_equal(a, b));
}

TEST(Parser, GeneratedProgramsRoundTrip) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::string text = generate_program_text(s);
    Program a = parse_program_or_throw(text);
    Program b = parse_program_or_throw(to_text(a));
    ASSERT_TRUE(structurally_equal(a, b)) << "seed " << s;
  }
}

TEST(Parser, SamplesParse) {
  std::filesystem::path dir = std::filesystem::path(PTAUTH_SOURCE_DIR) / "samples";
  int n = 0;
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".ir")
      continue;
    ++n;
    ParseResult r = parse_program(slurp(e.path()));
    EXPECT_TRUE(r.ok()) << e.path() << ": " << (r.ok() ? "" : format(r.diagnostics.front()));
  }
  EXPECT_GE(n, 4);
}

struct BadInput {
  const char *name;
  const char *text;
  const char *needle;
};

class ParserErrors : public ::testing::TestWithParam<BadInput> {};

TEST_P(ParserErrors, Diagnosed) {
  ParseResult r = parse_program(GetParam().text);
  ASSERT_FALSE(r.ok());
  bool found = false;
  for (const auto &d : r.diagnostics)
    found |= d.message.find(GetParam().needle) != std::string::npos;
  EXPECT_TRUE(found) << format(r.diagnostics.front());
  EXPECT_GT(r.diagnostics.front().line, 0);
}

INSTANTIATE_TEST_SUITE_P(
    Inputs, ParserErrors,
    ::testing::Values(
        BadInput{"undefined_label", "fn main {\n  br nowhere\n}\n", "undefined label"},
        BadInput{"duplicate_label", "fn main {\nx:\nx:\n  ret\n}\n", "duplicate label"},
        BadInput{"unknown_opcode", "fn main {\n  y = frob 1\n  ret\n}\n", "frob"},
        BadInput{"check_rejected", "fn main {\n  p = alloc 8\n  check p\n  ret\n}\n", "check"}),
    [](const auto &info) { return std::string(info.param.name); });

TEST(Parser, ChecksAllowedWhenAsked) {
  ParseOptions o;
  o.allow_check = true;
  EXPECT_TRUE(parse_program("fn main {\n  p = alloc 8\n  check p\n  ret\n}\n", o).ok());
}

TEST(Parser, ThrowingEntryPointCarriesDiagnostics) {
  try {
    parse_program_or_throw("fn main {\n  br x\n}\n");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.diagnostics.size(), 1u);
  }
}

TEST(Externals, Signatures) {
  const ExternalSig *sc = find_external("str_copy");
  ASSERT_NE(sc, nullptr);
  EXPECT_TRUE(sc->returns_pointer);
  EXPECT_EQ(find_external("nope"), nullptr);
  EXPECT_FALSE(find_external("opaque_free")->never_frees);
}
