//===- parser.hpp - Text format reader for the mini IR ----------*- C++ -*-===//
//
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
///
/// \file
/// Grammar (one instruction per line, `;` starts a comment):
///
///   program   := { entry | global | function }
///   entry     := "entry" NAME
///   global    := "global" NAME INT
///   function  := "fn" NAME [ "(" [ REG { "," REG } ] ")" ] "{" NL
///                { [ LABEL ":" ] [ instr ] NL } "}"
///   instr     := REG "=" "alloc" val
///              | "free" REG
///              | REG "=" "realloc" REG "," val
///              | REG "=" "load" [ "." W ] mem
///              | "store" [ "." W ] mem "," val
///              | REG "=" "ptradd" REG "," val
///              | REG "=" "copy" REG
///              | REG "=" "globaddr" NAME
///              | [ REG "=" ] ( "call" | "extcall" ) NAME "(" [ val { "," val } ] ")"
///              | REG "=" "const" INT
///              | "br" LABEL
///              | "cbr" REG "," LABEL "," LABEL
///              | REG "=" "cmp" ( eq|ne|lt|le|gt|ge ) val "," val
///              | REG "=" ( "add" | "sub" ) val "," val
///              | "ret" [ val ]
///              | "check" REG                 (instrumented output only)
///   mem       := "[" REG [ ( "+" | "-" ) INT ] "]"
///   val       := REG | INT
///   W         := 1 | 2 | 4 | 8
///
/// INT is decimal or 0x-prefixed hex, optionally negative.
///
//===----------------------------------------------------------------------===//

#ifndef PTAUTH_PARSER_HPP
#define PTAUTH_PARSER_HPP

#include "ptauth/ir.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptauth::ir {

struct Diagnostic {
  int line = 0;
  std::string message;
};

inline std::string format(const Diagnostic &d) {
  return "line " + std::to_string(d.line) + ": " + d.message;
}

struct ParseResult {
  Program program;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

struct ParseOptions {
  /// Accept CHECK instructions (re-reading instrumenter output).
  bool allow_check = false;
};

class ParseError : public std::runtime_error {
public:
  explicit ParseError(std::vector<Diagnostic> diags)
      : std::runtime_error(join(diags)), diagnostics(std::move(diags)) {}
  std::vector<Diagnostic> diagnostics;

private:
  static std::string join(const std::vector<Diagnostic> &d) {
    std::string s;
    for (const auto &x : d)
      s += format(x) + "\n";
    return s;
  }
};

namespace detail {

struct Token {
  enum class Kind : std::uint8_t { Ident, Int, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  std::int64_t value = 0;
};

class LineLexer {
public:
  LineLexer(std::string_view line, int lineno) : s_(line), line_(lineno) {}

  std::vector<Token> tokens(std::vector<Diagnostic> &diags) {
    std::vector<Token> out;
    std::size_t i = 0;
    int depth = 0;
    while (i < s_.size()) {
      char c = s_[i];
      if (c == ';')
        break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
          ++j;
        out.push_back({Token::Kind::Ident, std::string(s_.substr(i, j - i)), 0});
        i = j;
        continue;
      }
      // Inside brackets '-' is always the offset operator.
      bool neg = c == '-' && depth == 0 && i + 1 < s_.size() &&
                 std::isdigit(static_cast<unsigned char>(s_[i + 1]));
      if (std::isdigit(static_cast<unsigned char>(c)) || neg) {
        std::size_t j = i + (neg ? 1 : 0);
        int base = 10;
        if (j + 1 < s_.size() && s_[j] == '0' && (s_[j + 1] == 'x' || s_[j + 1] == 'X')) {
          base = 16;
          j += 2;
        }
        std::size_t digits_begin = j;
        while (j < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[j])))
          ++j;
        std::uint64_t mag = 0;
        auto [ptr, ec] = std::from_chars(s_.data() + digits_begin, s_.data() + j, mag, base);
        if (ec != std::errc() || ptr != s_.data() + j) {
          diags.push_back({line_, "malformed integer '" + std::string(s_.substr(i, j - i)) + "'"});
          return {};
        }
        std::int64_t v = neg ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
        out.push_back({Token::Kind::Int, std::string(s_.substr(i, j - i)), v});
        i = j;
        continue;
      }
      if (std::string_view("=,()[]+-:{}.").find(c) != std::string_view::npos) {
        depth += c == '[' ? 1 : c == ']' ? -1 : 0;
        out.push_back({Token::Kind::Punct, std::string(1, c), 0});
        ++i;
        continue;
      }
      diags.push_back({line_, std::string("unexpected character '") + c + "'"});
      return {};
    }
    return out;
  }

private:
  std::string_view s_;
  int line_;
};

class Parser {
public:
  Parser(std::string_view text, ParseOptions opts) : text_(text), opts_(opts) {}

  ParseResult run() {
    split_lines();
    while (pos_ < lines_.size()) {
      auto &toks = lines_[pos_].tokens;
      int line = lines_[pos_].number;
      if (toks.empty()) {
        ++pos_;
        continue;
      }
      const std::string &kw = toks[0].text;
      if (toks[0].kind == Token::Kind::Ident && kw == "global") {
        parse_global();
      } else if (toks[0].kind == Token::Kind::Ident && kw == "entry") {
        if (toks.size() != 2 || toks[1].kind != Token::Kind::Ident)
          error(line, "expected 'entry NAME'");
        else
          result_.program.entry = toks[1].text;
        ++pos_;
      } else if (toks[0].kind == Token::Kind::Ident && kw == "fn") {
        parse_function();
      } else {
        error(line, "expected 'fn', 'global' or 'entry', found '" + kw + "'");
        ++pos_;
      }
    }
    validate();
    return std::move(result_);
  }

private:
  struct Line {
    int number;
    std::vector<Token> tokens;
  };

  void error(int line, std::string msg) { result_.diagnostics.push_back({line, std::move(msg)}); }

  void split_lines() {
    int number = 0;
    std::size_t start = 0;
    while (start <= text_.size()) {
      std::size_t end = text_.find('\n', start);
      if (end == std::string_view::npos)
        end = text_.size();
      ++number;
      std::string_view raw = text_.substr(start, end - start);
      LineLexer lex(raw, number);
      lines_.push_back({number, lex.tokens(result_.diagnostics)});
      start = end + 1;
    }
  }

  void parse_global() {
    auto &t = lines_[pos_].tokens;
    int line = lines_[pos_].number;
    ++pos_;
    if (t.size() != 3 || t[1].kind != Token::Kind::Ident || t[2].kind != Token::Kind::Int ||
        t[2].value <= 0) {
      error(line, "expected 'global NAME SIZE' with SIZE > 0");
      return;
    }
    for (const auto &g : result_.program.globals)
      if (g.name == t[1].text)
        error(line, "duplicate global '" + t[1].text + "'");
    result_.program.globals.push_back({t[1].text, static_cast<std::uint64_t>(t[2].value)});
  }

  // Cursor over one line's tokens.
  struct Cursor {
    const std::vector<Token> &t;
    std::size_t i = 0;

    bool done() const { return i >= t.size(); }
    const Token *peek() const { return done() ? nullptr : &t[i]; }
    bool is_punct(char c) const { return !done() && t[i].kind == Token::Kind::Punct && t[i].text[0] == c; }
    bool is_ident() const { return !done() && t[i].kind == Token::Kind::Ident; }
    bool is_int() const { return !done() && t[i].kind == Token::Kind::Int; }
  };

  struct Bad {}; // aborts one line

  void expect_punct(Cursor &c, char p, int line) {
    if (!c.is_punct(p)) {
      error(line, std::string("expected '") + p + "'" + found(c));
      throw Bad{};
    }
    ++c.i;
  }

  static std::string found(const Cursor &c) {
    return c.done() ? " at end of line" : ", found '" + c.t[c.i].text + "'";
  }

  std::string expect_ident(Cursor &c, int line, const char *what) {
    if (!c.is_ident()) {
      error(line, std::string("expected ") + what + found(c));
      throw Bad{};
    }
    return c.t[c.i++].text;
  }

  std::int64_t expect_int(Cursor &c, int line, const char *what) {
    if (!c.is_int()) {
      error(line, std::string("expected ") + what + found(c));
      throw Bad{};
    }
    return c.t[c.i++].value;
  }

  std::uint32_t reg(Function &fn, const std::string &name) {
    std::uint32_t r = fn.reg(name);
    if (r != kNoReg)
      return r;
    fn.reg_names.push_back(name);
    return static_cast<std::uint32_t>(fn.reg_names.size() - 1);
  }

  Operand value(Cursor &c, Function &fn, int line) {
    if (c.is_int())
      return Operand::of_imm(c.t[c.i++].value);
    return Operand::of_reg(reg(fn, expect_ident(c, line, "register or integer")));
  }

  Operand reg_operand(Cursor &c, Function &fn, int line) {
    return Operand::of_reg(reg(fn, expect_ident(c, line, "register")));
  }

  void parse_function() {
    auto &head = lines_[pos_].tokens;
    int head_line = lines_[pos_].number;
    ++pos_;
    Function fn;
    Cursor c{head};
    c.i = 1;
    try {
      fn.name = expect_ident(c, head_line, "function name");
      if (c.is_punct('(')) {
        ++c.i;
        while (!c.is_punct(')')) {
          std::string p = expect_ident(c, head_line, "parameter register");
          if (fn.reg(p) != kNoReg)
            error(head_line, "duplicate parameter '" + p + "'");
          fn.params.push_back(reg(fn, p));
          if (!c.is_punct(')'))
            expect_punct(c, ',', head_line);
        }
        ++c.i;
      }
      expect_punct(c, '{', head_line);
      if (!c.done()) {
        error(head_line, "instructions must start on the line after '{'");
      }
    } catch (Bad &) {
    }
    if (result_.program.find(fn.name))
      error(head_line, "duplicate function '" + fn.name + "'");

    bool closed = false;
    while (pos_ < lines_.size()) {
      auto &toks = lines_[pos_].tokens;
      int line = lines_[pos_].number;
      ++pos_;
      if (toks.empty())
        continue;
      if (toks.size() == 1 && toks[0].kind == Token::Kind::Punct && toks[0].text == "}") {
        closed = true;
        break;
      }
      Cursor lc{toks};
      try {
        if (lc.t.size() >= 2 && lc.is_ident() && lc.t[1].kind == Token::Kind::Punct &&
            lc.t[1].text == ":") {
          std::string label = lc.t[0].text;
          if (fn.labels.contains(label))
            error(line, "duplicate label '" + label + "'");
          else
            fn.labels[label] = fn.body.size();
          lc.i = 2;
          if (lc.done())
            continue;
        }
        Instruction in = parse_instruction(lc, fn, line);
        if (!lc.done()) {
          error(line, "unexpected trailing '" + lc.t[lc.i].text + "'");
          continue;
        }
        in.line = line;
        in.origin = fn.body.size();
        fn.body.push_back(std::move(in));
      } catch (Bad &) {
      }
    }
    if (!closed)
      error(head_line, "function '" + fn.name + "' is missing its closing '}'");
    result_.program.functions.push_back(std::move(fn));
  }

  std::uint8_t width(Cursor &c, int line) {
    if (!c.is_punct('.'))
      return 8;
    ++c.i;
    std::int64_t w = expect_int(c, line, "access width");
    if (w != 1 && w != 2 && w != 4 && w != 8) {
      error(line, "access width must be 1, 2, 4 or 8");
      throw Bad{};
    }
    return static_cast<std::uint8_t>(w);
  }

  void mem(Cursor &c, Function &fn, Instruction &in, int line) {
    expect_punct(c, '[', line);
    in.args.push_back(reg_operand(c, fn, line));
    if (c.is_punct('+') || c.is_punct('-')) {
      bool minus = c.is_punct('-');
      ++c.i;
      std::int64_t off = expect_int(c, line, "offset");
      in.offset = minus ? -off : off;
    }
    expect_punct(c, ']', line);
  }

  Instruction parse_instruction(Cursor &c, Function &fn, int line) {
    Instruction in;
    if (c.t.size() >= 2 && c.is_ident() && c.t[1].kind == Token::Kind::Punct && c.t[1].text == "=") {
      in.dst = reg(fn, c.t[0].text);
      c.i = 2;
    }
    std::string op = expect_ident(c, line, "opcode");
    auto need_dst = [&](bool need) {
      if (need && !in.has_dst()) {
        error(line, "'" + op + "' needs a destination register");
        throw Bad{};
      }
      if (!need && in.has_dst()) {
        error(line, "'" + op + "' does not produce a value");
        throw Bad{};
      }
    };
    if (op == "alloc") {
      need_dst(true);
      in.op = Opcode::Alloc;
      in.args.push_back(value(c, fn, line));
    } else if (op == "free") {
      need_dst(false);
      in.op = Opcode::Free;
      in.args.push_back(reg_operand(c, fn, line));
    } else if (op == "realloc") {
      need_dst(true);
      in.op = Opcode::Realloc;
      in.args.push_back(reg_operand(c, fn, line));
      expect_punct(c, ',', line);
      in.args.push_back(value(c, fn, line));
    } else if (op == "load") {
      need_dst(true);
      in.op = Opcode::Load;
      in.width = width(c, line);
      mem(c, fn, in, line);
    } else if (op == "store") {
      need_dst(false);
      in.op = Opcode::Store;
      in.width = width(c, line);
      mem(c, fn, in, line);
      expect_punct(c, ',', line);
      in.args.push_back(value(c, fn, line));
    } else if (op == "ptradd") {
      need_dst(true);
      in.op = Opcode::PtrAdd;
      in.args.push_back(reg_operand(c, fn, line));
      expect_punct(c, ',', line);
      in.args.push_back(value(c, fn, line));
    } else if (op == "copy") {
      need_dst(true);
      in.op = Opcode::Copy;
      in.args.push_back(reg_operand(c, fn, line));
    } else if (op == "globaddr") {
      need_dst(true);
      in.op = Opcode::GlobAddr;
      in.symbol = expect_ident(c, line, "global name");
    } else if (op == "call" || op == "extcall") {
      in.op = op == "call" ? Opcode::Call : Opcode::ExtCall;
      in.symbol = expect_ident(c, line, "callee name");
      expect_punct(c, '(', line);
      while (!c.is_punct(')')) {
        in.args.push_back(value(c, fn, line));
        if (!c.is_punct(')'))
          expect_punct(c, ',', line);
      }
      ++c.i;
    } else if (op == "const") {
      need_dst(true);
      in.op = Opcode::Const;
      in.args.push_back(Operand::of_imm(expect_int(c, line, "integer")));
    } else if (op == "br") {
      need_dst(false);
      in.op = Opcode::Br;
      in.target = expect_ident(c, line, "label");
    } else if (op == "cbr") {
      need_dst(false);
      in.op = Opcode::Cbr;
      in.args.push_back(reg_operand(c, fn, line));
      expect_punct(c, ',', line);
      in.target = expect_ident(c, line, "label");
      expect_punct(c, ',', line);
      in.target_false = expect_ident(c, line, "label");
    } else if (op == "cmp") {
      need_dst(true);
      in.op = Opcode::Cmp;
      std::string p = expect_ident(c, line, "comparison predicate");
      auto pred = parse_pred(p);
      if (!pred) {
        error(line, "unknown comparison predicate '" + p + "'");
        throw Bad{};
      }
      in.pred = *pred;
      in.args.push_back(value(c, fn, line));
      expect_punct(c, ',', line);
      in.args.push_back(value(c, fn, line));
    } else if (op == "add" || op == "sub") {
      need_dst(true);
      in.op = op == "add" ? Opcode::Add : Opcode::Sub;
      in.args.push_back(value(c, fn, line));
      expect_punct(c, ',', line);
      in.args.push_back(value(c, fn, line));
    } else if (op == "ret") {
      need_dst(false);
      in.op = Opcode::Ret;
      if (!c.done())
        in.args.push_back(value(c, fn, line));
    } else if (op == "check") {
      need_dst(false);
      if (!opts_.allow_check) {
        error(line, "'check' is reserved for instrumented programs");
        throw Bad{};
      }
      in.op = Opcode::Check;
      in.args.push_back(reg_operand(c, fn, line));
    } else {
      error(line, "unknown opcode '" + op + "'");
      throw Bad{};
    }
    return in;
  }

  void validate() {
    Program &p = result_.program;
    if (!p.find(p.entry))
      error(0, "entry function '" + p.entry + "' is not defined");
    std::set<std::string> globals;
    for (const auto &g : p.globals)
      globals.insert(g.name);
    for (const auto &fn : p.functions) {
      std::vector<bool> defined(fn.num_regs(), false);
      for (auto r : fn.params)
        defined[r] = true;
      for (const auto &in : fn.body)
        if (in.has_dst())
          defined[in.dst] = true;
      for (const auto &in : fn.body) {
        for (const auto &a : in.args)
          if (a.is_reg() && !defined[a.reg])
            error(in.line, "register '" + fn.reg_names[a.reg] + "' is never assigned in '" +
                               fn.name + "'");
        for (const std::string *t : {&in.target, &in.target_false})
          if (!t->empty() && !fn.labels.contains(*t))
            error(in.line, "undefined label '" + *t + "'");
        if (in.op == Opcode::GlobAddr && !globals.contains(in.symbol))
          error(in.line, "undefined global '" + in.symbol + "'");
        if (in.op == Opcode::Call) {
          const Function *callee = p.find(in.symbol);
          if (!callee)
            error(in.line, "call to undefined function '" + in.symbol + "'");
          else if (callee->params.size() != in.args.size())
            error(in.line, "'" + in.symbol + "' takes " + std::to_string(callee->params.size()) +
                               " argument(s), " + std::to_string(in.args.size()) + " given");
        }
        if (in.op == Opcode::ExtCall) {
          const ExternalSig *sig = find_external(in.symbol);
          if (!sig)
            error(in.line, "link error: unknown external '" + in.symbol + "'");
          else if (sig->arity != in.args.size())
            error(in.line, "external '" + in.symbol + "' takes " + std::to_string(sig->arity) +
                               " argument(s)");
        }
      }
    }
  }

  std::string_view text_;
  ParseOptions opts_;
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  ParseResult result_;
};

} // namespace detail

inline ParseResult parse_program(std::string_view text, ParseOptions opts = {}) {
  return detail::Parser(text, opts).run();
}

/// Throws ParseError carrying every diagnostic.
inline Program parse_program_or_throw(std::string_view text, ParseOptions opts = {}) {
  ParseResult r = parse_program(text, opts);
  if (!r.ok())
    throw ParseError(std::move(r.diagnostics));
  return std::move(r.program);
}

} // namespace ptauth::ir

#endif // PTAUTH_PARSER_HPP
