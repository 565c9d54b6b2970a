// Copyright 2026 The hammersim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hammersim/gadgetscan.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hammersim/error.hpp"

namespace hammersim::gadgetscan {
namespace {

using victims::Check;
using victims::CheckOp;
using Kind = Token::Kind;

// ---------------------------------------------------------------------------
// Lexer

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        advance();
        line_start = true;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        continue;
      }
      if (line_start && c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      line_start = false;
      if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        Location at{line_, col_};
        advance();
        advance();
        while (true) {
          if (pos_ >= src_.size()) throw ParseError(at.line, at.column, "unterminated comment");
          if (src_[pos_] == '*' && peek(1) == '/') {
            advance();
            advance();
            break;
          }
          advance();
        }
        continue;
      }
      Token t;
      t.loc = {line_, col_};
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Kind::kIdent;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_')) {
          t.text += src_[pos_];
          advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Kind::kNumber;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_')) {
          t.text += src_[pos_];
          advance();
        }
      } else if (c == '"' || c == '\'') {
        t.kind = Kind::kString;
        char quote = c;
        t.text += c;
        advance();
        while (true) {
          if (pos_ >= src_.size() || src_[pos_] == '\n')
            throw ParseError(t.loc.line, t.loc.column, "unterminated literal");
          char d = src_[pos_];
          t.text += d;
          advance();
          if (d == '\\' && pos_ < src_.size()) {
            t.text += src_[pos_];
            advance();
          } else if (d == quote) {
            break;
          }
        }
      } else {
        t.kind = Kind::kPunct;
        static const char* const multi[] = {"...", "->", "::", "==", "!=", "<=", ">=", "&&",
                                            "||",  "++", "--", "+=", "-=", "*=", "/=", "%=",
                                            "|=",  "&=", "^=", "<<", ">>"};
        for (const char* m : multi) {
          std::size_t n = std::char_traits<char>::length(m);
          if (src_.compare(pos_, n, m) == 0) {
            t.text = m;
            break;
          }
        }
        if (t.text.empty()) t.text = std::string(1, c);
        for (std::size_t i = 0; i < t.text.size(); ++i) advance();
      }
      out.push_back(std::move(t));
    }
    Token end;
    end.kind = Kind::kEnd;
    end.loc = {line_, col_};
    out.push_back(end);
    return out;
  }

 private:
  char peek(std::size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

const std::map<std::string, std::uint32_t>& integer_widths() {
  static const std::map<std::string, std::uint32_t> m = {
      {"bool", 1},      {"_Bool", 1},      {"char", 8},      {"int8_t", 8},
      {"uint8_t", 8},   {"u_char", 8},     {"short", 16},    {"int16_t", 16},
      {"uint16_t", 16}, {"int", 32},       {"unsigned", 32}, {"signed", 32},
      {"int32_t", 32},  {"uint32_t", 32},  {"u_int", 32},    {"long", 64},
      {"size_t", 64},   {"ssize_t", 64},   {"int64_t", 64},  {"uint64_t", 64},
  };
  return m;
}

bool is_type_word(const std::string& s) {
  static const std::set<std::string> extra = {"void",   "const",  "static", "register",
                                              "struct", "volatile", "float",  "double",
                                              "extern", "inline", "enum",   "union"};
  return integer_widths().count(s) || extra.count(s);
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string path) : t_(std::move(toks)) {
    unit_.path = std::move(path);
  }

  SourceUnit run() {
    while (!at_end()) {
      if (is("...") || is(";")) {
        ++i_;
        continue;
      }
      top_level();
    }
    return std::move(unit_);
  }

 private:
  const Token& cur() const { return t_[i_]; }
  const Token& at(std::size_t k) const { return t_[std::min(i_ + k, t_.size() - 1)]; }
  bool at_end() const { return cur().kind == Kind::kEnd; }
  bool is(const char* p) const { return cur().kind == Kind::kPunct && cur().text == p; }
  bool is_word(const char* w) const { return cur().kind == Kind::kIdent && cur().text == w; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(cur().loc.line, cur().loc.column, what);
  }
  void expect(const char* p) {
    if (!is(p)) fail(std::string("expected '") + p + "'" + found());
    ++i_;
  }
  std::string found() const {
    return at_end() ? " at end of input" : ", found '" + cur().text + "'";
  }

  // Tokens up to (not including) the closing parenthesis matching an
  // already consumed '('.
  std::vector<Token> paren_body() {
    std::vector<Token> out;
    int depth = 1;
    while (true) {
      if (at_end()) fail("unbalanced '('");
      if (is("(")) ++depth;
      if (is(")") && --depth == 0) break;
      if (is("{") || is("}") || is(";")) {
        if (depth > 0 && !is(";")) fail("unexpected '" + cur().text + "' inside parentheses");
      }
      out.push_back(cur());
      ++i_;
    }
    ++i_;
    return out;
  }

  void top_level() {
    // Either a declaration ending in ';' or a function definition.
    std::vector<Token> head;
    int depth = 0;
    while (true) {
      if (at_end()) fail("unexpected end of input");
      if (depth == 0 && is(";")) {
        ++i_;
        return;
      }
      if (depth == 0 && is("{")) break;
      if (is("}")) fail("unexpected '}'");
      if (is("(")) ++depth;
      if (is(")")) {
        if (depth == 0) fail("unexpected ')'");
        --depth;
      }
      head.push_back(cur());
      ++i_;
    }
    Function fn;
    for (std::size_t k = 0; k + 1 < head.size(); ++k) {
      if (head[k].kind == Kind::kIdent && head[k + 1].text == "(") {
        fn.name = head[k].text;
        fn.loc = head[k].loc;
        break;
      }
    }
    if (fn.name.empty()) fail("expected a function definition");
    expect("{");
    fn.body = block_rest();
    unit_.functions.push_back(std::move(fn));
  }

  // Statements up to the matching '}' (consumed).
  std::vector<Stmt> block_rest() {
    std::vector<Stmt> out;
    while (!is("}")) {
      if (at_end()) fail("expected '}'");
      out.push_back(statement());
    }
    ++i_;
    return out;
  }

  Stmt statement() {
    Stmt s;
    s.loc = cur().loc;
    if (is("{")) {
      ++i_;
      s.kind = Stmt::Kind::kBlock;
      s.body = block_rest();
      return s;
    }
    if (is("...") || is(";")) {
      ++i_;
      if (is(";")) ++i_;
      return s;
    }
    if (is_word("if") || is_word("while") || is_word("for")) {
      bool is_if = is_word("if");
      ++i_;
      expect("(");
      s.kind = is_if ? Stmt::Kind::kIf : Stmt::Kind::kWhile;
      s.expr = paren_body();
      s.body.push_back(statement());
      if (is_if && is_word("else")) {
        ++i_;
        s.has_else = true;
        s.else_body.push_back(statement());
      }
      return s;
    }
    if (is_word("return")) {
      ++i_;
      s.kind = Stmt::Kind::kReturn;
      s.expr = until_semicolon();
      return s;
    }
    if (is_word("goto") || is_word("break") || is_word("continue")) {
      until_semicolon();
      return s;
    }
    if (is_word("else")) fail("'else' without 'if'");
    // label:
    if (cur().kind == Kind::kIdent && at(1).kind == Kind::kPunct && at(1).text == ":") {
      i_ += 2;
      return s;
    }
    std::vector<Token> toks = until_semicolon();
    if (toks.empty()) return s;
    if (looks_like_decl(toks)) {
      s.kind = Stmt::Kind::kDecl;
      s.decls = declarators(toks);
      return s;
    }
    std::size_t eq = find_assign(toks);
    if (eq != 0 && eq != toks.size()) {
      std::string lv;
      if (lvalue(toks, eq, lv)) {
        s.kind = Stmt::Kind::kAssign;
        s.target = lv;
        s.expr.assign(toks.begin() + static_cast<std::ptrdiff_t>(eq) + 1, toks.end());
        return s;
      }
    }
    s.kind = Stmt::Kind::kExpr;
    s.expr = std::move(toks);
    return s;
  }

  std::vector<Token> until_semicolon() {
    std::vector<Token> out;
    int depth = 0;
    while (true) {
      if (at_end()) fail("expected ';'");
      if (depth == 0 && is(";")) break;
      if (is("{") || is("}")) fail("expected ';'" + found());
      if (is("(") || is("[")) ++depth;
      if (is(")") || is("]")) {
        if (depth == 0) fail("unbalanced '" + cur().text + "'");
        --depth;
      }
      out.push_back(cur());
      ++i_;
    }
    ++i_;
    return out;
  }

  static std::size_t find_assign(const std::vector<Token>& toks) {
    int depth = 0;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      const Token& t = toks[k];
      if (t.kind != Kind::kPunct) continue;
      if (t.text == "(" || t.text == "[") ++depth;
      if (t.text == ")" || t.text == "]") --depth;
      if (depth != 0) continue;
      static const std::set<std::string> ops = {"=",  "+=", "-=", "*=", "/=",
                                                "%=", "|=", "&=", "^="};
      if (ops.count(t.text)) return k;
    }
    return toks.size();
  }

  // ident (('.' | '->') ident)* with an optional leading '*'.
  static bool lvalue(const std::vector<Token>& toks, std::size_t end, std::string& out) {
    std::size_t k = 0;
    if (toks[0].text == "*") ++k;
    if (k >= end || toks[k].kind != Kind::kIdent) return false;
    out = toks[k].text;
    ++k;
    while (k < end) {
      if ((toks[k].text == "." || toks[k].text == "->") && k + 1 < end &&
          toks[k + 1].kind == Kind::kIdent) {
        out += toks[k].text + toks[k + 1].text;
        k += 2;
      } else {
        return false;
      }
    }
    return true;
  }

  static bool looks_like_decl(const std::vector<Token>& toks) {
    if (toks[0].kind != Kind::kIdent) return false;
    if (is_type_word(toks[0].text)) return true;
    if (toks.size() < 2) return false;
    // `Type name ...` or `Type *name ...`
    if (toks[1].kind == Kind::kIdent) return true;
    if (toks[1].text == "*" && toks.size() > 2 && toks[2].kind == Kind::kIdent) {
      return toks.size() == 3 || toks[3].text == "=" || toks[3].text == ";" ||
             toks[3].text == "," || toks[3].text == "[";
    }
    return false;
  }

  std::vector<Decl> declarators(const std::vector<Token>& toks) {
    // Split at top-level commas.
    std::vector<std::vector<Token>> parts(1);
    int depth = 0;
    for (const Token& t : toks) {
      if (t.text == "(" || t.text == "[") ++depth;
      if (t.text == ")" || t.text == "]") --depth;
      if (depth == 0 && t.kind == Kind::kPunct && t.text == ",") {
        parts.emplace_back();
        continue;
      }
      parts.back().push_back(t);
    }

    std::vector<Decl> out;
    std::vector<std::string> base;
    bool is_register = false;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto& part = parts[p];
      if (part.empty()) throw ParseError(toks[0].loc.line, toks[0].loc.column, "empty declarator");
      Decl d;
      std::size_t eq = part.size();
      for (std::size_t k = 0; k < part.size(); ++k) {
        if (part[k].kind == Kind::kPunct && part[k].text == "=") {
          eq = k;
          break;
        }
      }
      std::size_t stop = eq;
      for (std::size_t k = 0; k < eq; ++k) {
        if (part[k].kind == Kind::kIdent && (part[k].text == "asm" || part[k].text == "__asm__")) {
          stop = k;
          for (std::size_t j = k; j < eq; ++j) {
            if (part[j].kind == Kind::kString) {
              d.asm_register = part[j].text.substr(1, part[j].text.size() - 2);
              if (!d.asm_register.empty() && d.asm_register[0] == '%')
                d.asm_register.erase(0, 1);
            }
          }
          break;
        }
      }
      // Drop array suffixes.
      std::size_t name_end = stop;
      for (std::size_t k = 0; k < stop; ++k) {
        if (part[k].text == "[") {
          name_end = k;
          break;
        }
      }
      bool array = name_end != stop;
      std::size_t name_at = name_end;
      for (std::size_t k = name_end; k-- > 0;) {
        if (part[k].kind == Kind::kIdent) {
          name_at = k;
          break;
        }
      }
      if (name_at == name_end)
        throw ParseError(part[0].loc.line, part[0].loc.column, "expected a declarator name");
      bool pointer = false;
      std::size_t lead = 0;
      if (p == 0) {
        for (std::size_t k = 0; k < name_at; ++k) {
          if (part[k].kind == Kind::kIdent) {
            if (part[k].text == "register") {
              is_register = true;
            } else if (part[k].text != "static" && part[k].text != "const" &&
                       part[k].text != "volatile") {
              base.push_back(part[k].text);
            }
          } else if (part[k].text == "*") {
            pointer = true;
          }
        }
        if (base.empty())
          throw ParseError(part[0].loc.line, part[0].loc.column, "expected a type");
      } else {
        for (; lead < name_at; ++lead) {
          if (part[lead].text == "*") {
            pointer = true;
          } else {
            throw ParseError(part[lead].loc.line, part[lead].loc.column,
                             "unexpected '" + part[lead].text + "' in declarator");
          }
        }
      }
      d.name = part[name_at].text;
      d.loc = part[name_at].loc;
      d.is_register = is_register;
      for (std::size_t k = 0; k < base.size(); ++k) d.type += (k ? " " : "") + base[k];
      d.width_bits = 0;
      if (!pointer && !array) {
        // `unsigned long` is 64 bits, `unsigned char` 8.
        for (const auto& w : base) {
          auto it = integer_widths().find(w);
          if (it == integer_widths().end()) {
            d.width_bits = 0;
            break;
          }
          if (w != "unsigned" && w != "signed") d.width_bits = it->second;
          else if (d.width_bits == 0) d.width_bits = it->second;
        }
      }
      if (pointer) d.type += " *";
      if (array) d.type += " []";
      if (eq != part.size()) {
        d.has_init = true;
        d.init.assign(part.begin() + static_cast<std::ptrdiff_t>(eq) + 1, part.end());
      }
      out.push_back(std::move(d));
    }
    return out;
  }

  std::vector<Token> t_;
  std::size_t i_ = 0;
  SourceUnit unit_;
};

// ---------------------------------------------------------------------------
// Scanner

std::optional<std::uint64_t> literal_value(const Token& t) {
  if (t.kind == Kind::kIdent) {
    if (t.text == "true") return 1;
    if (t.text == "false") return 0;
    return std::nullopt;
  }
  if (t.kind != Kind::kNumber) return std::nullopt;
  std::string s = t.text;
  while (!s.empty() && (s.back() == 'u' || s.back() == 'U' || s.back() == 'l' || s.back() == 'L'))
    s.pop_back();
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used, 0);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::uint64_t> constant_init(const std::vector<Token>& init) {
  std::size_t k = 0;
  // Casts like `(int) 0`.
  if (init.size() >= 4 && init[0].text == "(" && init[2].text == ")") k = 3;
  if (init.size() == k + 1) return literal_value(init[k]);
  if (init.size() == k + 2 && init[k].text == "-") {
    auto v = literal_value(init[k + 1]);
    if (v) return ~*v + 1;
  }
  return std::nullopt;
}

struct Path {
  std::string name;
  Location loc;
  std::size_t next = 0;  // index after the path
};

std::optional<Path> read_path(const std::vector<Token>& toks, std::size_t k) {
  if (k >= toks.size() || toks[k].kind != Kind::kIdent) return std::nullopt;
  Path p{toks[k].text, toks[k].loc, k + 1};
  while (p.next + 1 < toks.size() && (toks[p.next].text == "." || toks[p.next].text == "->") &&
         toks[p.next + 1].kind == Kind::kIdent) {
    p.name += toks[p.next].text + toks[p.next + 1].text;
    p.next += 2;
  }
  return p;
}

struct CondCheck {
  std::string var;
  Location loc;
  Check when_true;  // the condition holds exactly when this check holds
};

Check negate(Check c) {
  c.op = c.op == CheckOp::kEquals ? CheckOp::kNotEquals : CheckOp::kEquals;
  return c;
}

std::optional<CondCheck> parse_condition(std::vector<Token> toks) {
  // Strip fully enclosing parentheses.
  while (toks.size() >= 2 && toks.front().text == "(" && toks.back().text == ")") {
    int depth = 0;
    bool encloses = true;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (toks[k].text == "(") ++depth;
      if (toks[k].text == ")") --depth;
      if (depth == 0 && k + 1 < toks.size()) {
        encloses = false;
        break;
      }
    }
    if (!encloses) break;
    toks = std::vector<Token>(toks.begin() + 1, toks.end() - 1);
  }
  if (toks.empty()) return std::nullopt;
  bool negated = false;
  std::size_t k = 0;
  if (toks[0].text == "!") {
    negated = true;
    k = 1;
  }
  auto path = read_path(toks, k);
  if (path && literal_value(toks[k]) == std::nullopt) {
    if (path->next == toks.size()) {
      Check c{negated ? CheckOp::kEquals : CheckOp::kNotEquals, 0};
      return CondCheck{path->name, path->loc, c};
    }
    if (!negated && path->next + 2 == toks.size() &&
        (toks[path->next].text == "==" || toks[path->next].text == "!=")) {
      auto v = literal_value(toks[path->next + 1]);
      if (!v) return std::nullopt;
      Check c{toks[path->next].text == "==" ? CheckOp::kEquals : CheckOp::kNotEquals, *v};
      return CondCheck{path->name, path->loc, c};
    }
    return std::nullopt;
  }
  // literal op path
  if (!negated && toks.size() >= 3 && (toks[1].text == "==" || toks[1].text == "!=")) {
    auto v = literal_value(toks[0]);
    auto p = read_path(toks, 2);
    if (v && p && p->next == toks.size()) {
      Check c{toks[1].text == "==" ? CheckOp::kEquals : CheckOp::kNotEquals, *v};
      return CondCheck{p->name, p->loc, c};
    }
  }
  return std::nullopt;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool success_word(const std::string& s) {
  return lower(s).find("success") != std::string::npos || s == "OK" ||
         (s.size() > 3 && s.compare(s.size() - 3, 3, "_OK") == 0);
}
bool failure_word(const std::string& s) {
  std::string l = lower(s);
  return l.find("fail") != std::string::npos || l.find("denied") != std::string::npos ||
         s.find("ERR") != std::string::npos;
}

struct Markers {
  bool success = false;
  bool failure = false;
};

void collect(const std::vector<Token>& toks, Markers& m) {
  for (const Token& t : toks) {
    if (t.kind != Kind::kIdent) continue;
    m.success = m.success || success_word(t.text);
    m.failure = m.failure || failure_word(t.text);
  }
}
void collect(const std::vector<Stmt>& stmts, Markers& m) {
  for (const Stmt& s : stmts) {
    collect(s.expr, m);
    for (const Decl& d : s.decls) collect(d.init, m);
    collect(s.body, m);
    collect(s.else_body, m);
  }
}

// Whether the first branch is the success path. Defaults to yes.
bool first_branch_succeeds(const Markers& a, const Markers& b) {
  if (a.success != b.success) return a.success;
  if (a.failure != b.failure) return b.failure;
  return true;
}

struct VarInfo {
  Decl decl;
  std::optional<std::uint64_t> init;
  bool written = false;
};

struct Found {
  std::string var;
  Location loc;
  Check success;
};

class FunctionScan {
 public:
  FunctionScan(const Function& fn, const std::string& file) : fn_(fn), file_(file) {}

  std::vector<GadgetReport> run() {
    walk(fn_.body);
    std::vector<GadgetReport> out;
    for (const Found& f : found_) {
      auto it = vars_.find(f.var);
      if (it == vars_.end()) continue;
      const VarInfo& v = it->second;
      if (!v.init || !v.written || v.decl.width_bits == 0) continue;
      GadgetReport r;
      r.file = file_;
      r.function = fn_.name;
      r.variable = f.var;
      r.type = v.decl.type;
      r.storage = v.decl.is_register
                      ? "register(" + (v.decl.asm_register.empty() ? std::string("?")
                                                                   : v.decl.asm_register) +
                            ")"
                      : "stack";
      r.decl_loc = v.decl.loc;
      r.check_loc = f.loc;
      std::uint64_t mask = v.decl.width_bits >= 64 ? ~std::uint64_t{0}
                                                   : (std::uint64_t{1} << v.decl.width_bits) - 1;
      r.init_value = *v.init & mask;
      r.check = f.success;
      r.cls = classify(v.decl.width_bits, r.init_value, r.check);
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  void walk(const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) {
      switch (s.kind) {
        case Stmt::Kind::kDecl:
          for (const Decl& d : s.decls) {
            exprs(d.init);
            VarInfo v{d, d.has_init ? constant_init(d.init) : std::nullopt, false};
            vars_[d.name] = v;
          }
          break;
        case Stmt::Kind::kAssign:
          exprs(s.expr);
          if (auto it = vars_.find(s.target); it != vars_.end()) it->second.written = true;
          break;
        case Stmt::Kind::kExpr:
        case Stmt::Kind::kReturn:
          exprs(s.expr);
          break;
        case Stmt::Kind::kIf: {
          exprs(s.expr);
          if (auto c = parse_condition(s.expr)) {
            Markers a, b;
            collect(s.body, a);
            collect(s.else_body, b);
            Check success = first_branch_succeeds(a, b) ? c->when_true : negate(c->when_true);
            found_.push_back({c->var, c->loc, success});
          }
          walk(s.body);
          walk(s.else_body);
          break;
        }
        case Stmt::Kind::kWhile:
          exprs(s.expr);
          walk(s.body);
          break;
        case Stmt::Kind::kBlock:
          walk(s.body);
          break;
        case Stmt::Kind::kSkip:
          break;
      }
    }
  }

  // Address-taken variables and ternary truth tests inside an expression.
  void exprs(const std::vector<Token>& toks) {
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (toks[k].text == "&" && (k == 0 || toks[k - 1].text == "(" || toks[k - 1].text == ",")) {
        if (auto p = read_path(toks, k + 1)) {
          if (auto it = vars_.find(p->name); it != vars_.end()) it->second.written = true;
        }
      }
      if (toks[k].kind != Kind::kIdent) continue;
      logical_operand(toks, k);
      if (k > 0 && toks[k - 1].text != "(" && toks[k - 1].text != "," && toks[k - 1].text != "=" &&
          toks[k - 1].text != "return")
        continue;
      auto p = read_path(toks, k);
      if (!p || p->next >= toks.size() || toks[p->next].text != "?") continue;
      // x ? a : b
      std::size_t colon = p->next + 1;
      int depth = 0;
      for (; colon < toks.size(); ++colon) {
        if (toks[colon].text == "(") ++depth;
        if (toks[colon].text == ")") --depth;
        if (depth == 0 && toks[colon].text == ":") break;
      }
      if (colon >= toks.size()) continue;
      std::size_t end = colon + 1;
      depth = 0;
      for (; end < toks.size(); ++end) {
        if (toks[end].text == "(") ++depth;
        if (toks[end].text == ")" && --depth < 0) break;
        if (depth == 0 && toks[end].text == ",") break;
      }
      Markers a, b;
      collect(std::vector<Token>(toks.begin() + static_cast<std::ptrdiff_t>(p->next) + 1,
                                 toks.begin() + static_cast<std::ptrdiff_t>(colon)),
              a);
      collect(std::vector<Token>(toks.begin() + static_cast<std::ptrdiff_t>(colon) + 1,
                                 toks.begin() + static_cast<std::ptrdiff_t>(end)),
              b);
      Check when_true{CheckOp::kNotEquals, 0};
      found_.push_back(
          {p->name, p->loc, first_branch_succeeds(a, b) ? when_true : negate(when_true)});
    }
  }

  // A bare variable joined by `&&` or `||` is a truth test, e.g.
  // `return (result && ok);`.
  void logical_operand(const std::vector<Token>& toks, std::size_t k) {
    auto is = [&](std::size_t i, std::initializer_list<const char*> any) {
      for (const char* a : any)
        if (toks[i].text == a) return true;
      return false;
    };
    bool negated = k > 0 && toks[k - 1].text == "!";
    std::size_t before = negated ? k - 1 : k;
    bool open_left = before == 0 || is(before - 1, {"(", "&&", "||", "return"});
    if (!open_left) return;
    auto p = read_path(toks, k);
    if (!p) return;
    bool open_right = p->next == toks.size() || is(p->next, {")", "&&", "||"});
    if (!open_right) return;
    bool joined = (before > 0 && is(before - 1, {"&&", "||"})) ||
                  (p->next < toks.size() && is(p->next, {"&&", "||"}));
    if (!joined) return;
    Check c{negated ? CheckOp::kEquals : CheckOp::kNotEquals, 0};
    found_.push_back({p->name, p->loc, c});
  }

  const Function& fn_;
  const std::string& file_;
  std::map<std::string, VarInfo> vars_;
  std::vector<Found> found_;
};

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

SourceUnit parse(const std::string& source, const std::string& path) {
  return Parser(Lexer(source).run(), path).run();
}

SourceUnit parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

FuzzResult flip_fuzz(std::uint32_t width, std::uint64_t init, const victims::Check& check) {
  if (width == 0 || width > 64) throw Error("width must be in [1, 64]");
  std::uint64_t mask = width == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
  init &= mask;
  FuzzResult r;
  r.width = width;
  for (std::uint32_t b = 0; b < width; ++b) {
    if (check.satisfied(init ^ (std::uint64_t{1} << b))) r.single_bit_flips.push_back(b);
  }
  if (check.satisfied(init)) {
    r.min_flips = 0;
  } else if (check.op == CheckOp::kEquals) {
    if ((check.value & ~mask) == 0)
      r.min_flips = static_cast<std::uint32_t>(std::popcount(init ^ check.value));
  } else {
    r.min_flips = 1;  // init equals the excluded value; any flip leaves it
  }
  return r;
}

std::string Classification::label() const {
  switch (hardness) {
    case Hardness::kAnyBit:
      return "ANY_BIT";
    case Hardness::kSingleBit:
      return single_bit == 0 ? "LSB_ONLY" : "SINGLE_BIT(" + std::to_string(single_bit) + ")";
    case Hardness::kExactPattern:
      return satisfiable ? "EXACT_PATTERN(" + std::to_string(min_flips) + ")" : "UNSATISFIABLE";
  }
  return "?";
}

Classification classify(std::uint32_t width, std::uint64_t init, const victims::Check& check) {
  FuzzResult f = flip_fuzz(width, init, check);
  Classification c;
  c.width = width;
  c.exploitable = static_cast<std::uint32_t>(f.single_bit_flips.size());
  c.satisfiable = f.min_flips.has_value();
  c.min_flips = f.min_flips.value_or(0);
  if (c.exploitable == width && width > 1) {
    c.hardness = Hardness::kAnyBit;
  } else if (c.exploitable > 0) {
    c.hardness = Hardness::kSingleBit;
    c.single_bit = f.single_bit_flips.front();
  } else {
    c.hardness = Hardness::kExactPattern;
  }
  return c;
}

std::vector<GadgetReport> scan(const SourceUnit& unit) {
  std::vector<GadgetReport> out;
  for (const Function& fn : unit.functions) {
    auto r = FunctionScan(fn, unit.path).run();
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

Advice suggest(const GadgetReport& report, Rng& rng) {
  Advice a;
  const Classification& c = report.cls;
  std::ostringstream text;
  bool weak = c.hardness != Hardness::kExactPattern || c.min_flips < 8;
  if (!weak) {
    text << "already hardened: success needs " << c.min_flips << " flips in precise locations";
  } else {
    // Constants are drawn at 32 bits (64 for wider variables) so that even
    // narrow variables get a pattern worth flipping into.
    std::uint32_t bits = c.width > 32 ? 64 : 32;
    std::uint64_t mask = bits == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
    std::uint64_t v = 0;
    int pc = 0;
    do {
      v = rng.next() & mask;
      pc = std::popcount(v);
    } while (pc < static_cast<int>(bits) / 2 - 4 || pc > static_cast<int>(bits) / 2 + 4 ||
             v == (report.init_value & mask));
    a.rewrite = true;
    a.constant = v;
    a.constant_popcount = static_cast<std::uint32_t>(pc);
    text << "replace `" << report.variable << ' ' << report.check.to_string() << "` with `"
         << report.variable << " == " << hex(v) << "`, assign " << hex(v)
         << " only on the success path (popcount " << pc << ')';
    if (c.width < bits) text << ", widening the variable to " << bits << " bits";
  }
  if (c.width > 1 && report.init_value <= 1 && report.check.value <= 1) {
    a.boolean_hint = true;
    text << "; the variable is only compared against 0 or 1, a bool would shrink the target to one bit";
  }
  a.text = text.str();
  return a;
}

std::string format_report(const GadgetReport& r) {
  std::ostringstream out;
  out << r.file << ':' << r.check_loc.line << ':' << r.check_loc.column << ": " << r.function
      << ": '" << r.variable << "' (" << r.type << ", " << r.width_bits() << "-bit, " << r.storage
      << ", declared at line " << r.decl_loc.line << ") init " << hex(r.init_value)
      << ", success when " << r.variable << ' ' << r.check.to_string() << ": " << r.cls.label()
      << ", " << r.cls.exploitable << '/' << r.cls.width << " single-bit flips";
  return out.str();
}

std::string to_json(const std::vector<GadgetReport>& reports, int indent) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const GadgetReport& r : reports) {
    nlohmann::ordered_json j;
    j["file"] = r.file;
    j["function"] = r.function;
    j["variable"] = r.variable;
    j["type"] = r.type;
    j["width"] = r.cls.width;
    j["storage"] = r.storage;
    j["decl_line"] = r.decl_loc.line;
    j["line"] = r.check_loc.line;
    j["column"] = r.check_loc.column;
    j["init_value"] = hex(r.init_value);
    j["check"] = r.check.to_string();
    j["hardness"] = r.cls.label();
    j["exploitable_flips"] = r.cls.exploitable;
    j["min_flips"] = r.cls.satisfiable ? nlohmann::ordered_json(r.cls.min_flips)
                                       : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump(indent);
}

}  // namespace hammersim::gadgetscan
